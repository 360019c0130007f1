//! Toolkit-level configuration: one JSON file with full defaults, consumed
//! by the CLI and echoed into every report. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beta::WeightConfig;
use crate::divergence::GridSpec;
use crate::error::{Error, Result};
use crate::eval::PairStatsConfig;
use crate::nms::{NmsConfig, Strategy};

/// Environment variable consulted when no `--config` path is given.
pub const CONFIG_ENV: &str = "BETAREP_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsOptions {
    pub strategy: Strategy,
    pub iou_threshold: f64,
    pub viou_threshold: f64,
    pub kl_threshold: f64,
    pub soft_sigma: f64,
    pub soft_score_floor: f64,
}

impl Default for NmsOptions {
    fn default() -> Self {
        let d = NmsConfig::default();
        Self {
            strategy: d.strategy,
            iou_threshold: d.iou_threshold,
            viou_threshold: d.viou_threshold,
            kl_threshold: d.kl_threshold,
            soft_sigma: d.soft_sigma,
            soft_score_floor: d.soft_score_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Matching threshold on full-box IoU.
    pub iou_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskOptions {
    pub height: usize,
    pub width: usize,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self {
            height: 7,
            width: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub fiou_threshold: f64,
    pub viou_threshold: f64,
    pub kl_thresholds: Vec<f64>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        let d = PairStatsConfig::default();
        Self {
            fiou_threshold: d.fiou_threshold,
            viou_threshold: d.viou_threshold,
            kl_thresholds: d.kl_thresholds,
        }
    }
}

/// The full toolkit configuration with the stock constants.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub weights: WeightConfig,
    pub grid: GridSpec,
    pub nms: NmsOptions,
    pub eval: EvalOptions,
    pub mask: MaskOptions,
    pub compare: CompareOptions,
}

impl ToolkitConfig {
    /// Load from an explicit path, else from `BETAREP_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let env_path = std::env::var(CONFIG_ENV).ok();
        let effective = path
            .map(Path::to_path_buf)
            .or_else(|| env_path.map(std::path::PathBuf::from));
        let cfg = match effective {
            Some(p) => {
                let text = std::fs::read_to_string(&p)?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {e}", p.display()))
                })?
            }
            None => Self::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.grid.validate()?;
        self.nms_config().validate()?;
        if !(self.eval.iou_threshold > 0.0 && self.eval.iou_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eval iou_threshold {} outside (0, 1)",
                self.eval.iou_threshold
            )));
        }
        if self.mask.height == 0 || self.mask.width == 0 {
            return Err(Error::InvalidConfig("mask grid must be at least 1x1".into()));
        }
        if self.compare.kl_thresholds.is_empty() {
            return Err(Error::InvalidConfig("compare.kl_thresholds is empty".into()));
        }
        Ok(())
    }

    /// Assemble the NMS configuration from the shared constants.
    pub fn nms_config(&self) -> NmsConfig {
        NmsConfig {
            strategy: self.nms.strategy,
            iou_threshold: self.nms.iou_threshold,
            viou_threshold: self.nms.viou_threshold,
            kl_threshold: self.nms.kl_threshold,
            soft_sigma: self.nms.soft_sigma,
            soft_score_floor: self.nms.soft_score_floor,
            grid: self.grid,
            weights: self.weights,
        }
    }

    pub fn pair_stats_config(&self) -> PairStatsConfig {
        PairStatsConfig {
            weights: self.weights,
            grid: self.grid,
            fiou_threshold: self.compare.fiou_threshold,
            viou_threshold: self.compare.viou_threshold,
            kl_thresholds: self.compare.kl_thresholds.clone(),
        }
    }

    /// JSON value echoed into reports for provenance.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialization cannot fail")
    }
}
