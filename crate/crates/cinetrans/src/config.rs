//! Run configuration: every threshold and knob with its default, loadable
//! from one JSON file and echoed into JSON outputs.

use std::path::Path;

use cinetrans_core::curation::{GammaAnchor, StitchConfig};
use cinetrans_core::metrics::ExtractorIds;
use cinetrans_core::shotdetect::{GradualConfig, SegmentConfig};
use serde::{Deserialize, Serialize};

use crate::io::{read_json, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cut_threshold: f64,
    pub single_threshold: f64,
    pub all_threshold: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_anchor: GammaAnchor,
    pub extractors: ExtractorIds,
    /// Preset name or explicit index list; see `LayerPolicy::preset`.
    pub layer_policy: String,
    pub bins: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seg = SegmentConfig::default();
        let stitch = StitchConfig::default();
        Self {
            cut_threshold: seg.cut_threshold,
            single_threshold: seg.single_threshold,
            all_threshold: seg.all_threshold,
            alpha: stitch.alpha,
            beta: stitch.beta,
            gamma: stitch.gamma,
            gamma_anchor: stitch.gamma_anchor,
            extractors: ExtractorIds::default(),
            layer_policy: "all".into(),
            bins: 50,
            epsilon: 1e-9,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            cut_threshold: self.cut_threshold,
            single_threshold: self.single_threshold,
            all_threshold: self.all_threshold,
            gradual: GradualConfig::default(),
        }
    }

    pub fn stitch_config(&self) -> StitchConfig {
        StitchConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            gamma_anchor: self.gamma_anchor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.cut_threshold, c.single_threshold, c.all_threshold), (27.0, 0.45, 0.50));
        assert_eq!((c.alpha, c.beta, c.gamma), (0.9, 0.7, 0.8));
        assert_eq!((c.bins, c.epsilon), (50, 1e-9));
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"cut_threshold": 30}"#).unwrap();
        assert_eq!(c.cut_threshold, 30.0);
        assert_eq!(c.beta, 0.7);
        assert!(serde_json::from_str::<RunConfig>(r#"{"cut": 30}"#).is_err());
    }
}
