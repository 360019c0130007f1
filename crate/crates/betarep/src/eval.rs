//! Detection evaluation (average precision, log-average miss rate) and the
//! ground-truth pair study comparing IoU criteria against the KL metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{boxes_to_beta, WeightConfig};
use crate::divergence::{iou, sym_kl, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::SceneAnnotation;
use crate::nms::{overlapping_pairs, Detection};

/// Miss rates below this are clamped before the geometric mean.
const MR_CLAMP: f64 = 1e-10;

/// A ground-truth box with its ignore flag; matching runs on full boxes.
#[derive(Debug, Clone, Copy)]
pub struct GtBox {
    pub bbox: BBox,
    pub ignore: bool,
}

/// Per-detection outcome of matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetLabel {
    /// Matched the ground truth at this index.
    Tp { gt_idx: usize },
    Fp,
    /// Overlapped only ignore-flagged ground truth; excluded from scoring.
    Ignored,
}

/// Outcome of greedy matching for one image.
#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Parallel to the input detections, in input order.
    pub labels: Vec<DetLabel>,
    /// Parallel to the input ground truths.
    pub gt_matched: Vec<bool>,
    pub tp: usize,
    pub fp: usize,
    /// Non-ignored ground truths left unmatched.
    pub missed: usize,
    /// Non-ignored ground-truth count.
    pub num_gt: usize,
}

/// Greedy score-ordered matching: each detection takes the highest-IoU
/// unmatched non-ignored ground truth with IoU at or above `iou_thresh`.
/// Detections that only reach ignore-flagged ground truth are neither true
/// nor false positives. Detections are processed by (score desc, id asc)
/// regardless of input order; labels come back in input order.
pub fn match_detections(dets: &[Detection], gts: &[GtBox], iou_thresh: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("finite scores")
            .then(dets[a].id.cmp(&dets[b].id))
    });

    let mut labels = vec![DetLabel::Fp; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    let mut tp = 0;
    let mut fp = 0;
    for &di in &order {
        let dbox = &dets[di].pedestrian.boundary;
        let mut best: Option<(f64, usize)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt.ignore || gt_matched[gi] {
                continue;
            }
            let o = iou(dbox, &gt.bbox);
            if o >= iou_thresh && best.is_none_or(|(bo, _)| o > bo) {
                best = Some((o, gi));
            }
        }
        match best {
            Some((_, gi)) => {
                gt_matched[gi] = true;
                labels[di] = DetLabel::Tp { gt_idx: gi };
                tp += 1;
            }
            None => {
                let hits_ignore = gts
                    .iter()
                    .any(|gt| gt.ignore && iou(dbox, &gt.bbox) >= iou_thresh);
                if hits_ignore {
                    labels[di] = DetLabel::Ignored;
                } else {
                    labels[di] = DetLabel::Fp;
                    fp += 1;
                }
            }
        }
    }
    let num_gt = gts.iter().filter(|g| !g.ignore).count();
    let missed = gts
        .iter()
        .zip(&gt_matched)
        .filter(|(g, &m)| !g.ignore && !m)
        .count();
    MatchResult {
        labels,
        gt_matched,
        tp,
        fp,
        missed,
        num_gt,
    }
}

/// Cumulative (tp, fp) totals at each distinct score threshold, sweeping
/// from the highest score down. Grouping equal scores makes both metrics
/// independent of tie order.
fn score_sweep(scored: &[(f64, bool)]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
    let mut points = Vec::new();
    let mut tp = 0;
    let mut fp = 0;
    let mut k = 0;
    while k < sorted.len() {
        let score = sorted[k].0;
        while k < sorted.len() && sorted[k].0 == score {
            if sorted[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((tp, fp));
    }
    points
}

/// All-points interpolated area under the precision-recall curve.
///
/// `scored` holds one `(score, is_tp)` entry per scored detection over the
/// whole dataset (ignored detections excluded); `total_gt` counts
/// non-ignored ground truths.
pub fn average_precision(scored: &[(f64, bool)], total_gt: usize) -> Result<f64> {
    if total_gt == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs a nonempty ground-truth set".into(),
        ));
    }
    let points = score_sweep(scored);
    // Precision envelope from the right, integrated over recall increments.
    let pr: Vec<(f64, f64)> = points
        .iter()
        .map(|&(tp, fp)| {
            (
                tp as f64 / total_gt as f64,
                tp as f64 / (tp + fp).max(1) as f64,
            )
        })
        .collect();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut max_right = 0.0;
    let mut segments: Vec<(f64, f64)> = Vec::with_capacity(pr.len());
    for &(recall, precision) in pr.iter().rev() {
        max_right = f64::max(max_right, precision);
        segments.push((recall, max_right));
    }
    segments.reverse();
    for (recall, envelope) in segments {
        if recall > prev_recall {
            ap += (recall - prev_recall) * envelope;
            prev_recall = recall;
        }
    }
    Ok(ap)
}

/// Log-average miss rate over nine FPPI reference points log-evenly spaced
/// in `[1e-2, 1]`: the geometric mean of the miss rate at the best operating
/// point whose FPPI does not exceed each reference, with miss rates clamped
/// at 1e-10 before the log (a perfect detector therefore scores the clamp
/// floor, reported as 0 within 1e-9).
pub fn log_avg_miss_rate(
    scored: &[(f64, bool)],
    total_gt: usize,
    num_images: usize,
) -> Result<f64> {
    if total_gt == 0 {
        return Err(Error::UndefinedMetric(
            "miss rate needs a nonempty ground-truth set".into(),
        ));
    }
    if num_images == 0 {
        return Err(Error::UndefinedMetric(
            "miss rate needs a positive image count".into(),
        ));
    }
    // Operating points (fppi, miss rate); an implicit point at threshold
    // above every score (no detections) anchors fppi = 0, mr = 1.
    let mut ops = vec![(0.0, 1.0)];
    for (tp, fp) in score_sweep(scored) {
        ops.push((
            fp as f64 / num_images as f64,
            1.0 - tp as f64 / total_gt as f64,
        ));
    }
    let mut log_sum = 0.0;
    for k in 0..9 {
        let reference = 10f64.powf(-2.0 + k as f64 / 4.0);
        // fppi is nondecreasing along the sweep, so the candidates form a
        // prefix and the last of them has minimal miss rate.
        let mr = ops
            .iter()
            .take_while(|(fppi, _)| *fppi <= reference)
            .last()
            .map(|&(_, mr)| mr)
            .unwrap_or(1.0);
        log_sum += mr.max(MR_CLAMP).ln();
    }
    Ok((log_sum / 9.0).exp())
}

/// One overlapped ground-truth pair: full-box IoU, visible-box IoU on the
/// annotated boxes, and the symmetrized KL between the fitted beta
/// representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub image: String,
    pub idx_a: usize,
    pub idx_b: usize,
    pub fiou: f64,
    pub viou: f64,
    pub sym_kl: f64,
}

/// Thresholds for the failed-case counts in [`pair_statistics`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairStatsConfig {
    pub weights: WeightConfig,
    pub grid: GridSpec,
    pub fiou_threshold: f64,
    pub viou_threshold: f64,
    /// Each threshold gets its own KL failed-case count.
    pub kl_thresholds: Vec<f64>,
}

impl Default for PairStatsConfig {
    fn default() -> Self {
        Self {
            weights: WeightConfig::default(),
            grid: GridSpec::default(),
            fiou_threshold: 0.5,
            viou_threshold: 0.35,
            kl_thresholds: vec![6.0, 7.0],
        }
    }
}

/// Failed-case totals: pairs of distinct ground-truth pedestrians that a
/// suppression criterion would wrongly merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub total_pairs: usize,
    /// Pairs with fIoU above the fiou threshold.
    pub fiou_failed: usize,
    /// Pairs with vIoU above the viou threshold.
    pub viou_failed: usize,
    /// Per KL threshold: pairs with symmetrized KL at or below it.
    pub kl_failed: Vec<(f64, usize)>,
}

/// For every same-scene pair of non-ignored pedestrians with positive
/// full-box overlap, record fIoU, annotated-box vIoU, and the symmetrized KL
/// between their beta representations. Scenes are processed in parallel;
/// output order is (scene order, pair index order) regardless of thread
/// count.
pub fn pair_statistics(
    scenes: &[SceneAnnotation],
    cfg: &PairStatsConfig,
) -> Result<(Vec<PairRecord>, PairSummary)> {
    cfg.weights.validate()?;
    cfg.grid.validate()?;
    let per_scene: Vec<Vec<PairRecord>> = scenes
        .par_iter()
        .map(|scene| {
            let persons: Vec<_> = scene.persons.iter().filter(|p| !p.ignore).collect();
            let betas: Vec<_> = persons
                .iter()
                .map(|p| boxes_to_beta(&p.boxes, &cfg.weights))
                .collect::<Result<Vec<_>>>()?;
            let mut records = Vec::new();
            for (i, j) in overlapping_pairs(persons.iter().map(|p| *p.boxes.full())) {
                let f = iou(persons[i].boxes.full(), persons[j].boxes.full());
                let v = iou(persons[i].boxes.visible(), persons[j].boxes.visible());
                let d = sym_kl(&betas[i], &betas[j], &cfg.grid)?;
                records.push(PairRecord {
                    image: scene.id.clone(),
                    idx_a: i,
                    idx_b: j,
                    fiou: f,
                    viou: v,
                    sym_kl: d,
                });
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;

    let records: Vec<PairRecord> = per_scene.into_iter().flatten().collect();
    let summary = summarize_pairs(&records, cfg);
    Ok((records, summary))
}

/// Failed-case counts over a record set.
pub fn summarize_pairs(records: &[PairRecord], cfg: &PairStatsConfig) -> PairSummary {
    PairSummary {
        total_pairs: records.len(),
        fiou_failed: records
            .iter()
            .filter(|r| r.fiou > cfg.fiou_threshold)
            .count(),
        viou_failed: records
            .iter()
            .filter(|r| r.viou > cfg.viou_threshold)
            .count(),
        kl_failed: cfg
            .kl_thresholds
            .iter()
            .map(|&t| (t, records.iter().filter(|r| r.sym_kl <= t).count()))
            .collect(),
    }
}
