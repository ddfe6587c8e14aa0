//! Runtime configuration: a JSON file (`--config`) merged with command-line
//! flag overrides. Flags win.

use std::path::Path;

use anyhow::Context;
use cloudinterp::flow::{FlowEstimatorConfig, FlowMethod};
use cloudinterp::fusion::FusionConfig;
use cloudinterp::keypoints::IssParams;
use cloudinterp::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub flow: FlowEstimatorConfig,
    pub fusion: FusionConfig,
    pub train: TrainConfig,
    pub iss: IssParams,
    /// Point budget per frame for the pipeline commands.
    pub points: usize,
    /// Instance size at or below which EMD is solved exactly.
    pub exact_emd_threshold: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            flow: FlowEstimatorConfig::default(),
            fusion: FusionConfig::default(),
            train: TrainConfig::default(),
            iss: IssParams::default(),
            points: 16384,
            exact_emd_threshold: 512,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: AppConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies the global flag overrides on top of the file values.
    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.fusion.seed = seed;
            self.train.seed = seed;
        }
        if let Some(points) = o.points {
            self.points = points;
            self.train.points_per_frame = points;
        }
        if let Some(k) = o.k {
            self.fusion.k = k;
        }
        if let Some(method) = o.flow_method {
            self.flow.method = method;
        }
        if o.ablate_sampling {
            self.fusion.ablate_adaptive_sampling = true;
        }
        if o.ablate_knn {
            self.fusion.ablate_adaptive_knn = true;
        }
        if o.ablate_attention {
            self.fusion.ablate_attention = true;
        }
        if let Some(th) = o.exact_emd_threshold {
            self.exact_emd_threshold = th;
        }
    }
}

/// Parsed global flags, kept separate so they can be merged after an
/// optional config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub k: Option<usize>,
    pub flow_method: Option<FlowMethod>,
    pub ablate_sampling: bool,
    pub ablate_knn: bool,
    pub ablate_attention: bool,
    pub exact_emd_threshold: Option<usize>,
}
