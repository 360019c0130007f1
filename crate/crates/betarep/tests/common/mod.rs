#![allow(dead_code)]

//! Shared test oracles. Everything here recomputes expectations through an
//! independent route (quadrature, naive O(n^2) loops) and must not call into
//! the code paths it checks beyond the pairwise metric primitives under
//! separate test.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use betarep::{
    beta_to_visible_box, iou, sym_kl, BBox, Detection, NmsConfig, PairedBoxes, Strategy,
    WeightConfig,
};

/// Composite Simpson over `[lo, hi]` with panel edges aligned to the sorted
/// interior `breaks`, total panel count split proportionally to segment
/// length (at least 2 per segment). Nodes that land exactly on a segment
/// edge are nudged inside it so a piecewise integrand is always sampled at
/// its one-sided value; the true integral is unaffected (measure zero), but
/// Simpson would otherwise give the ambiguous boundary sample finite weight.
pub fn simpson_segmented(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64], panels: usize) -> f64 {
    let (s, _, _) = simpson_accumulate(&|x| (f(x), 0.0, 0.0), lo, hi, breaks, panels);
    s
}

/// Simpson moments of a weight function in one pass: returns
/// `(int w, int x w, int x^2 w)` with the same panel layout as
/// [`simpson_segmented`].
pub fn simpson_moments(
    w: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    panels: usize,
) -> (f64, f64, f64) {
    simpson_accumulate(
        &|x| {
            let v = w(x);
            (v, v * x, v * x * x)
        },
        lo,
        hi,
        breaks,
        panels,
    )
}

fn simpson_accumulate(
    f: &dyn Fn(f64) -> (f64, f64, f64),
    lo: f64,
    hi: f64,
    breaks: &[f64],
    panels: usize,
) -> (f64, f64, f64) {
    let mut edges = vec![lo];
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total_len = hi - lo;
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let n = (((b - a) / total_len * panels as f64).ceil() as usize).max(2);
        let h = (b - a) / n as f64;
        let nudge = (b - a) * 1e-12;
        for k in 0..n {
            let x0 = a + k as f64 * h;
            for (x, c) in [
                (x0.max(a + nudge), h / 6.0),
                (x0 + h / 2.0, 4.0 * h / 6.0),
                ((x0 + h).min(b - nudge), h / 6.0),
            ] {
                let (v0, v1, v2) = f(x);
                s0 += c * v0;
                s1 += c * v1;
                s2 += c * v2;
            }
        }
    }
    (s0, s1, s2)
}

/// Double-exponential (tanh-sinh) quadrature over (0, 1). The integrand
/// receives `(x, 1 - x)` with the complement computed stably, so endpoint
/// factors like `(1-x)^(b-1)` keep full precision near 1.
pub fn tanh_sinh01(f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let steps = (5.5 / h) as i64;
    let mut total = 0.0;
    for k in -steps..=steps {
        let t = k as f64 * h;
        let s = 0.5 * PI * t.sinh();
        // x = 1/(1+e^(-2s)), 1-x = e^(-2s)/(1+e^(-2s))
        let e = (-2.0 * s).exp();
        let denom = 1.0 + e;
        let x = 1.0 / denom;
        let omx = e / denom;
        let weight = PI * t.cosh() * x * omx * h;
        if weight > 0.0 && x > 0.0 && omx > 0.0 {
            total += weight * f(x, omx);
        }
    }
    total
}

/// Naive O(n^2) greedy NMS with the same schedule contract: highest score
/// first, ties by ascending id, suppression predicate re-evaluated per pair
/// with no prefiltering.
pub fn reference_nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut pool: Vec<Detection> = dets.to_vec();
    let mut kept = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let better = pool[i].score > pool[best].score
                || (pool[i].score == pool[best].score && pool[i].id < pool[best].id);
            if better {
                best = i;
            }
        }
        let keeper = pool.remove(best);
        pool.retain(|d| !reference_suppresses(&keeper, d, cfg));
        kept.push(keeper);
    }
    kept
}

fn reference_suppresses(kept: &Detection, other: &Detection, cfg: &NmsConfig) -> bool {
    let fiou = iou(&kept.pedestrian.boundary, &other.pedestrian.boundary);
    match cfg.strategy {
        Strategy::Fiou => fiou > cfg.iou_threshold,
        Strategy::Viou => reference_viou(kept, other, cfg) > cfg.viou_threshold,
        Strategy::FiouViou => {
            fiou > cfg.iou_threshold && reference_viou(kept, other, cfg) > cfg.viou_threshold
        }
        Strategy::Beta => {
            sym_kl(&kept.pedestrian, &other.pedestrian, &cfg.grid).unwrap() <= cfg.kl_threshold
        }
        Strategy::Soft => unreachable!("soft has no hard predicate"),
    }
}

fn reference_viou(a: &Detection, b: &Detection, cfg: &NmsConfig) -> f64 {
    let va = beta_to_visible_box(&a.pedestrian, &cfg.weights).unwrap();
    let vb = beta_to_visible_box(&b.pedestrian, &cfg.weights).unwrap();
    iou(&va, &vb)
}

/// Naive all-pairs positive-overlap enumeration.
pub fn reference_overlaps(boxes: &[BBox]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if iou(&boxes[i], &boxes[j]) > 0.0 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Random valid paired boxes: full box anywhere in a 1000x1000 field, the
/// visible interval per axis covering at least `min_frac` of the extent.
pub fn random_paired(rng: &mut ChaCha8Rng, min_frac: f64) -> PairedBoxes {
    let w = rng.gen_range(20.0..300.0);
    let h = rng.gen_range(40.0..500.0);
    let l = rng.gen_range(0.0..1000.0 - w);
    let t = rng.gen_range(0.0..1000.0 - h);
    let frac = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        let size = rng.gen_range(min_frac..1.0);
        let start = rng.gen_range(0.0..=(1.0 - size));
        (start, start + size)
    };
    let (ax, bx) = frac(rng);
    let (ay, by) = frac(rng);
    PairedBoxes::new(
        BBox::new(l, t, l + w, t + h).unwrap(),
        BBox::new(l + ax * w, t + ay * h, l + bx * w, t + by * h).unwrap(),
    )
    .unwrap()
}

/// A cluster-structured random detection scene: `clusters` base pedestrians
/// with `dups` jittered duplicates each, scores shuffled but distinct.
pub fn random_scene(rng: &mut ChaCha8Rng, clusters: usize, dups: usize) -> Vec<Detection> {
    let weights = WeightConfig::default();
    let mut dets = Vec::new();
    let mut id = 0u64;
    for _ in 0..clusters {
        let base = random_paired(rng, 0.15);
        for _ in 0..dups {
            let jx = rng.gen_range(-4.0..4.0);
            let jy = rng.gen_range(-4.0..4.0);
            let full = base.full().translated(jx, jy);
            let vis = base.visible().translated(jx, jy);
            let paired = PairedBoxes::new(full, vis).unwrap();
            let bp = betarep::boxes_to_beta(&paired, &weights).unwrap();
            // Distinct scores keep the schedule unambiguous across
            // implementations; ties are covered by dedicated tests.
            let score = rng.gen_range(0.05..0.99);
            dets.push(Detection::new(bp, score, id).unwrap());
            id += 1;
        }
    }
    dets
}
