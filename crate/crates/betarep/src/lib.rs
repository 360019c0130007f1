//! Beta-distribution representation for occluded pedestrians.
//!
//! A pedestrian annotated with a full-body box and a visible box is encoded
//! as eight parameters: the full-body boundary `[l, t, r, b]` plus per-axis
//! beta shape parameters `[alpha_x, beta_x, alpha_y, beta_y]`. The beta
//! shapes are fitted from the weighted pixel moments of the paired boxes, so
//! the distribution peaks over the visible part instead of spreading
//! uniformly over the boundary.
//!
//! On top of the representation the crate provides:
//!
//! - symmetrized KL divergence between two pedestrians as a distance metric
//!   ([`divergence::sym_kl`]), computed on a shared discretized grid;
//! - greedy NMS with pluggable suppression predicates — full-box IoU,
//!   visible-box IoU, their conjunction, Gaussian soft rescoring, and the
//!   KL-based variant ([`nms`]);
//! - anchor-relative target encoding and beta-mask rendering for detector
//!   heads ([`head`]);
//! - detection evaluation (average precision, log-average miss rate) and
//!   ground-truth pair statistics ([`eval`]);
//! - annotation ingestion (odgt JSON lines), detection serialization, and a
//!   seeded synthetic crowd generator ([`io`], [`synth`]).
//!
//! The `betarep` binary exposes the batch workflows: `convert`, `nms`,
//! `eval`, `compare`, `render-mask`, and `synth`.

pub mod beta;
pub mod config;
pub mod divergence;
mod error;
pub mod eval;
pub mod geometry;
pub mod head;
pub mod io;
pub mod nms;
pub mod special;
pub mod synth;

pub use beta::{
    beta_pdf_1d, beta_pdf_2d, beta_to_visible_box, boxes_to_beta, boxes_to_beta_flagged,
    moments_to_beta, moments_to_beta_flagged, weighted_moments, Axis, BetaParams1D,
    BetaPedestrian, ClampFlags, Moments1D, WeightConfig,
};
pub use config::ToolkitConfig;
pub use divergence::{discretize, iou, kl_1d_closed, kl_grid, sym_kl, GridSpec, PMFGrid};
pub use error::{Error, Result};
pub use eval::{
    average_precision, log_avg_miss_rate, match_detections, pair_statistics, DetLabel, GtBox,
    MatchResult, PairRecord, PairStatsConfig, PairSummary,
};
pub use geometry::{BBox, PairedBoxes};
pub use head::{
    decode_targets, encode_targets, mask_kl_loss, render_mask, smooth_l1, Anchor, BetaTargets,
    DeltaVec, MaskGrid,
};
pub use io::SceneAnnotation;
pub use nms::{greedy_nms, pairwise_prefilter, run_nms, soft_nms, Detection, NmsConfig, Strategy};
pub use synth::{synth_scenes, OcclusionPattern, SynthConfig};
