//! Greedy suppression parameterized by similarity metric: full-box IoU,
//! visible-box IoU, their conjunction, Gaussian soft rescoring, and the
//! KL-divergence predicate (BetaNMS).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{beta_to_visible_box, BetaPedestrian, WeightConfig};
use crate::divergence::{iou, sym_kl, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// A scored candidate: pedestrian plus confidence and an opaque tag used for
/// deterministic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub pedestrian: BetaPedestrian,
    pub score: f64,
    pub id: u64,
}

impl Detection {
    pub fn new(pedestrian: BetaPedestrian, score: f64, id: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) || score.is_nan() {
            return Err(Error::Domain(format!(
                "detection score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            pedestrian,
            score,
            id,
        })
    }
}

/// Suppression strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Suppress when full-box IoU exceeds `iou_threshold`.
    Fiou,
    /// Suppress when the IoU of the approximate visible boxes exceeds
    /// `viou_threshold`.
    Viou,
    /// Suppress when both IoU predicates fire.
    FiouViou,
    /// Gaussian score decay instead of hard suppression.
    Soft,
    /// Suppress when the symmetrized KL divergence is at or below
    /// `kl_threshold` (small divergence means same person).
    Beta,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fiou" => Ok(Self::Fiou),
            "viou" => Ok(Self::Viou),
            "fiou_viou" => Ok(Self::FiouViou),
            "soft" => Ok(Self::Soft),
            "beta" => Ok(Self::Beta),
            other => Err(Error::InvalidConfig(format!(
                "unknown NMS strategy '{other}' (expected fiou, viou, fiou_viou, soft, or beta)"
            ))),
        }
    }
}

/// Thresholds and grid parameters for all strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsConfig {
    pub strategy: Strategy,
    pub iou_threshold: f64,
    pub viou_threshold: f64,
    /// In nats.
    pub kl_threshold: f64,
    pub soft_sigma: f64,
    pub soft_score_floor: f64,
    pub grid: GridSpec,
    /// Weight constants used to recover approximate visible boxes.
    pub weights: WeightConfig,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Beta,
            iou_threshold: 0.5,
            viou_threshold: 0.35,
            kl_threshold: 7.0,
            soft_sigma: 0.5,
            soft_score_floor: 0.001,
            grid: GridSpec::default(),
            weights: WeightConfig::default(),
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_threshold", self.iou_threshold),
            ("viou_threshold", self.viou_threshold),
            ("kl_threshold", self.kl_threshold),
            ("soft_sigma", self.soft_sigma),
            ("soft_score_floor", self.soft_score_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite (got {v})"
                )));
            }
        }
        self.grid.validate()?;
        self.weights.validate()
    }
}

/// Indices sorted by (score descending, id ascending); the deterministic
/// processing schedule shared by every strategy.
fn schedule(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("scores are finite by construction")
            .then(dets[a].id.cmp(&dets[b].id))
    });
    order
}

/// Unordered index pairs of detections whose full boundaries overlap with
/// positive area, found by a sweep over the x-extents. Pairs are returned
/// as `(i, j)` with `i < j`, sorted lexicographically.
pub fn pairwise_prefilter(dets: &[Detection]) -> Vec<(usize, usize)> {
    overlapping_pairs(dets.iter().map(|d| d.pedestrian.boundary))
}

/// Sweep-line positive-overlap pair enumeration over arbitrary boxes.
pub(crate) fn overlapping_pairs(boxes: impl Iterator<Item = BBox>) -> Vec<(usize, usize)> {
    let boxes: Vec<BBox> = boxes.collect();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[a]
            .l
            .partial_cmp(&boxes[b].l)
            .expect("finite box coordinates")
            .then(a.cmp(&b))
    });
    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].l >= boxes[i].r {
                break;
            }
            if boxes[i].t < boxes[j].b && boxes[j].t < boxes[i].b {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Classic greedy NMS with the hard suppression predicates.
///
/// Iteratively keeps the highest-scoring remaining detection and removes
/// every remaining detection the predicate marks as a duplicate of it. The
/// `Soft` strategy has no hard predicate; use [`soft_nms`] or [`run_nms`].
///
/// For the `Beta` strategy the KL divergence is evaluated only for pairs
/// with overlapping boundaries: disjoint boundaries put the divergence near
/// `ln(1/epsilon_floor)`, far above any usable threshold, so those pairs can
/// never be duplicates.
pub fn greedy_nms(dets: &[Detection], cfg: &NmsConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    if dets.is_empty() {
        return Ok(Vec::new());
    }
    if cfg.strategy == Strategy::Soft {
        return Err(Error::InvalidConfig(
            "soft strategy has no hard suppression predicate; use soft_nms".into(),
        ));
    }

    // Approximate visible boxes, needed by the vIoU predicates.
    let visible: Vec<BBox> = match cfg.strategy {
        Strategy::Viou | Strategy::FiouViou => dets
            .iter()
            .map(|d| beta_to_visible_box(&d.pedestrian, &cfg.weights))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };

    // Overlap adjacency for the KL prefilter.
    let neighbors: Vec<Vec<usize>> = if cfg.strategy == Strategy::Beta {
        let mut adj = vec![Vec::new(); dets.len()];
        for (i, j) in pairwise_prefilter(dets) {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    } else {
        Vec::new()
    };

    let order = schedule(dets);
    let mut alive = vec![true; dets.len()];
    let mut kept = Vec::new();

    for &idx in &order {
        if !alive[idx] {
            continue;
        }
        alive[idx] = false;
        kept.push(dets[idx]);
        let keeper = &dets[idx].pedestrian;

        match cfg.strategy {
            Strategy::Fiou => {
                for &other in &order {
                    if alive[other]
                        && iou(&keeper.boundary, &dets[other].pedestrian.boundary)
                            > cfg.iou_threshold
                    {
                        alive[other] = false;
                    }
                }
            }
            Strategy::Viou => {
                for &other in &order {
                    if alive[other] && iou(&visible[idx], &visible[other]) > cfg.viou_threshold {
                        alive[other] = false;
                    }
                }
            }
            Strategy::FiouViou => {
                for &other in &order {
                    if alive[other]
                        && iou(&keeper.boundary, &dets[other].pedestrian.boundary)
                            > cfg.iou_threshold
                        && iou(&visible[idx], &visible[other]) > cfg.viou_threshold
                    {
                        alive[other] = false;
                    }
                }
            }
            Strategy::Beta => {
                // Evaluate divergences for the still-alive overlapping
                // candidates in parallel; the kept/suppressed outcome only
                // depends on per-pair values, so the result is identical
                // for any thread count.
                let candidates: Vec<usize> = neighbors[idx]
                    .iter()
                    .copied()
                    .filter(|&other| alive[other])
                    .collect();
                let suppressed: Vec<(usize, bool)> = candidates
                    .par_iter()
                    .map(|&other| {
                        let d = sym_kl(keeper, &dets[other].pedestrian, &cfg.grid)?;
                        Ok((other, d <= cfg.kl_threshold))
                    })
                    .collect::<Result<_>>()?;
                for (other, suppress) in suppressed {
                    if suppress {
                        alive[other] = false;
                    }
                }
            }
            Strategy::Soft => unreachable!(),
        }
    }
    Ok(kept)
}

/// Gaussian soft rescoring: every remaining detection's score decays by
/// `exp(-fIoU^2 / sigma)` against the selected one; detections falling below
/// `soft_score_floor` are dropped. Output is ordered by final score
/// (descending, ties by id).
pub fn soft_nms(dets: &[Detection], cfg: &NmsConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let mut pool: Vec<Detection> = dets.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if pool[i].score > pool[best].score
                || (pool[i].score == pool[best].score && pool[i].id < pool[best].id)
            {
                best = i;
            }
        }
        let keeper = pool.swap_remove(best);
        for d in &mut pool {
            let o = iou(&keeper.pedestrian.boundary, &d.pedestrian.boundary);
            if o > 0.0 {
                d.score *= (-o * o / cfg.soft_sigma).exp();
            }
        }
        pool.retain(|d| d.score >= cfg.soft_score_floor);
        out.push(keeper);
    }
    Ok(out)
}

/// Dispatch on `cfg.strategy`: hard strategies run [`greedy_nms`], the soft
/// strategy runs [`soft_nms`].
pub fn run_nms(dets: &[Detection], cfg: &NmsConfig) -> Result<Vec<Detection>> {
    match cfg.strategy {
        Strategy::Soft => soft_nms(dets, cfg),
        _ => greedy_nms(dets, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::{boxes_to_beta, BetaParams1D};
    use crate::geometry::PairedBoxes;
    use approx::assert_relative_eq;

    fn ped(boundary: [f64; 4], shape: [f64; 4]) -> BetaPedestrian {
        BetaPedestrian::new(
            BBox::new(boundary[0], boundary[1], boundary[2], boundary[3]).unwrap(),
            BetaParams1D::new(shape[0], shape[1]).unwrap(),
            BetaParams1D::new(shape[2], shape[3]).unwrap(),
        )
    }

    fn det(boundary: [f64; 4], score: f64, id: u64) -> Detection {
        Detection::new(ped(boundary, [1.5, 1.5, 1.5, 1.5]), score, id).unwrap()
    }

    fn from_pair(full: [f64; 4], vis: [f64; 4], score: f64, id: u64) -> Detection {
        let paired = PairedBoxes::new(
            BBox::new(full[0], full[1], full[2], full[3]).unwrap(),
            BBox::new(vis[0], vis[1], vis[2], vis[3]).unwrap(),
        )
        .unwrap();
        Detection::new(
            boxes_to_beta(&paired, &WeightConfig::default()).unwrap(),
            score,
            id,
        )
        .unwrap()
    }

    fn cfg(strategy: Strategy) -> NmsConfig {
        NmsConfig {
            strategy,
            ..NmsConfig::default()
        }
    }

    #[test]
    fn empty_input_is_empty_output() {
        for s in [Strategy::Fiou, Strategy::Viou, Strategy::FiouViou, Strategy::Beta] {
            assert!(greedy_nms(&[], &cfg(s)).unwrap().is_empty());
        }
        assert!(soft_nms(&[], &cfg(Strategy::Soft)).unwrap().is_empty());
    }

    #[test]
    fn identical_duplicates_keep_highest_score() {
        let b = [0.0, 0.0, 100.0, 200.0];
        let dets = [det(b, 0.8, 1), det(b, 0.9, 0)];
        for s in [Strategy::Fiou, Strategy::Viou, Strategy::FiouViou, Strategy::Beta] {
            let kept = greedy_nms(&dets, &cfg(s)).unwrap();
            assert_eq!(kept.len(), 1, "strategy {s:?}");
            assert_eq!(kept[0].score, 0.9);
        }
    }

    #[test]
    fn score_ties_break_by_id() {
        let b = [0.0, 0.0, 100.0, 200.0];
        let dets = [det(b, 0.9, 7), det(b, 0.9, 2)];
        let kept = greedy_nms(&dets, &cfg(Strategy::Fiou)).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 2);
    }

    #[test]
    fn beta_distinguishes_overlapping_pair_with_disjoint_visible_parts() {
        // Two pedestrians whose full boxes overlap at fIoU = 2/3 but whose
        // visible strips are the top of one and the bottom of the other.
        let a = from_pair([0.0, 0.0, 100.0, 200.0], [0.0, 0.0, 100.0, 60.0], 0.9, 0);
        let b = from_pair(
            [0.0, 40.0, 100.0, 240.0],
            [0.0, 190.0, 100.0, 240.0],
            0.8,
            1,
        );
        let f = iou(&a.pedestrian.boundary, &b.pedestrian.boundary);
        assert!(f > 0.5, "fIoU {f} must exceed the fiou threshold");
        let d = sym_kl(&a.pedestrian, &b.pedestrian, &GridSpec::default()).unwrap();
        assert!(d > 7.0, "divergence {d} must exceed the beta threshold");

        let kept_fiou = greedy_nms(&[a, b], &cfg(Strategy::Fiou)).unwrap();
        assert_eq!(kept_fiou.len(), 1);
        let kept_beta = greedy_nms(&[a, b], &cfg(Strategy::Beta)).unwrap();
        assert_eq!(kept_beta.len(), 2);
    }

    #[test]
    fn three_detection_chain_matches_hand_trace() {
        // a (0.9) overlaps b (0.8) above threshold; c (0.7) overlaps b but
        // not a. Greedy: keep a, suppress b, then keep c.
        let a = det([0.0, 0.0, 100.0, 100.0], 0.9, 0);
        let b = det([30.0, 0.0, 130.0, 100.0], 0.8, 1);
        let c = det([95.0, 0.0, 195.0, 100.0], 0.7, 2);
        assert!(iou(&a.pedestrian.boundary, &b.pedestrian.boundary) > 0.5);
        assert!(iou(&b.pedestrian.boundary, &c.pedestrian.boundary) < 0.5);
        assert!(iou(&a.pedestrian.boundary, &c.pedestrian.boundary) < 0.5);
        let kept = greedy_nms(&[a, b, c], &cfg(Strategy::Fiou)).unwrap();
        let ids: Vec<u64> = kept.iter().map(|d| d.id).collect();
        assert_eq!(ids, vec![0, 2]);
    }

    #[test]
    fn hard_nms_is_idempotent_and_preserves_scores() {
        let dets = [
            det([0.0, 0.0, 100.0, 100.0], 0.9, 0),
            det([10.0, 0.0, 110.0, 100.0], 0.8, 1),
            det([300.0, 0.0, 400.0, 100.0], 0.7, 2),
            det([305.0, 5.0, 405.0, 105.0], 0.6, 3),
        ];
        for s in [Strategy::Fiou, Strategy::Viou, Strategy::FiouViou, Strategy::Beta] {
            let kept = greedy_nms(&dets, &cfg(s)).unwrap();
            let again = greedy_nms(&kept, &cfg(s)).unwrap();
            assert_eq!(kept, again, "strategy {s:?}");
            for k in &kept {
                assert!(dets.iter().any(|d| d == k), "kept is a subset with scores intact");
            }
        }
    }

    #[test]
    fn soft_nms_leaves_disjoint_untouched_and_decays_duplicates() {
        let far = [
            det([0.0, 0.0, 100.0, 100.0], 0.9, 0),
            det([500.0, 0.0, 600.0, 100.0], 0.8, 1),
        ];
        let out = soft_nms(&far, &cfg(Strategy::Soft)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score, 0.9);
        assert_eq!(out[1].score, 0.8);

        let dup = [
            det([0.0, 0.0, 100.0, 100.0], 0.9, 0),
            det([0.0, 0.0, 100.0, 100.0], 0.8, 1),
        ];
        let out = soft_nms(&dup, &cfg(Strategy::Soft)).unwrap();
        assert_eq!(out.len(), 2);
        assert_relative_eq!(out[1].score, 0.8 * (-2.0f64).exp(), max_relative = 1e-12);
        // Ordering by final score is total and stable.
        assert!(out[0].score >= out[1].score);
    }

    #[test]
    fn soft_nms_drops_below_floor() {
        let dup = [
            det([0.0, 0.0, 100.0, 100.0], 0.9, 0),
            det([0.0, 0.0, 100.0, 100.0], 0.005, 1),
        ];
        let out = soft_nms(&dup, &cfg(Strategy::Soft)).unwrap();
        // 0.005 * exp(-2) ~ 0.00068 < 0.001
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn prefilter_counts() {
        let disjoint: Vec<Detection> = (0..10)
            .map(|i| det([i as f64 * 200.0, 0.0, i as f64 * 200.0 + 100.0, 100.0], 0.5, i))
            .collect();
        assert!(pairwise_prefilter(&disjoint).is_empty());

        let stacked: Vec<Detection> = (0..100)
            .map(|i| det([0.0, 0.0, 100.0, 100.0 + i as f64], 0.5, i))
            .collect();
        assert_eq!(pairwise_prefilter(&stacked).len(), 4950);
    }

    #[test]
    fn run_nms_dispatches_soft() {
        let dup = [
            det([0.0, 0.0, 100.0, 100.0], 0.9, 0),
            det([0.0, 0.0, 100.0, 100.0], 0.8, 1),
        ];
        let hard = run_nms(&dup, &cfg(Strategy::Fiou)).unwrap();
        assert_eq!(hard.len(), 1);
        let soft = run_nms(&dup, &cfg(Strategy::Soft)).unwrap();
        assert_eq!(soft.len(), 2);
        assert!(greedy_nms(&dup, &cfg(Strategy::Soft)).is_err());
    }

    #[test]
    fn rejects_invalid_scores() {
        let p = ped([0.0, 0.0, 10.0, 10.0], [1.5, 1.5, 1.5, 1.5]);
        assert!(Detection::new(p, 1.5, 0).is_err());
        assert!(Detection::new(p, f64::NAN, 0).is_err());
    }
}
