//! TOML run configuration with CLI flag overrides layered on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{ContextCalibration, TrainOptions, NOISE_GRID};
use vad_core::dae::{TrainConfig, DEFAULT_HIDDEN_DIMS};
use vad_core::feature::BlockSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaToggles {
    pub categories: bool,
    pub spatial: bool,
    pub temporal: bool,
    pub group: bool,
}

impl Default for SchemaToggles {
    fn default() -> Self {
        Self { categories: true, spatial: true, temporal: true, group: true }
    }
}

impl SchemaToggles {
    pub fn sources(&self) -> Vec<BlockSource> {
        let mut out = Vec::new();
        if self.categories {
            out.push(BlockSource::Categories);
        }
        if self.spatial {
            out.push(BlockSource::Spatial);
        }
        if self.temporal {
            out.push(BlockSource::Temporal);
        }
        if self.group {
            out.push(BlockSource::Group);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub noise_grid: Vec<f64>,
    pub holdout_fraction: f64,
    pub hidden_dims: Vec<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            batch_size: base.batch_size,
            max_epochs: base.max_epochs,
            learning_rate: base.learning_rate,
            beta1: base.beta1,
            beta2: base.beta2,
            adam_epsilon: base.adam_epsilon,
            patience: base.patience,
            min_delta: base.min_delta,
            noise_grid: NOISE_GRID.to_vec(),
            holdout_fraction: 0.1,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSettings {
    pub threshold_percentile: f64,
    pub top_k: usize,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self { threshold_percentile: 99.0, top_k: 3 }
    }
}

/// Run configuration: sane defaults, optionally loaded from TOML, with CLI
/// flags overriding individual fields.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub schema: SchemaToggles,
    pub train: TrainSettings,
    pub context: ContextCalibration,
    pub detect: DetectSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Assembles [`TrainOptions`]; `no_context` forces a categories-only
    /// schema regardless of the toggles.
    pub fn train_options(&self, seed: u64, no_context: bool) -> TrainOptions {
        let sources = if no_context {
            vec![BlockSource::Categories]
        } else {
            self.schema.sources()
        };
        TrainOptions {
            sources,
            hidden_dims: self.train.hidden_dims.clone(),
            train: TrainConfig {
                noise_factor: 0.0, // per grid entry
                learning_rate: self.train.learning_rate,
                beta1: self.train.beta1,
                beta2: self.train.beta2,
                adam_epsilon: self.train.adam_epsilon,
                batch_size: self.train.batch_size,
                max_epochs: self.train.max_epochs,
                seed,
                patience: self.train.patience,
                min_delta: self.train.min_delta,
            },
            noise_grid: self.train.noise_grid.clone(),
            calibration: self.context,
            threshold_percentile: self.detect.threshold_percentile,
            holdout_fraction: self.train.holdout_fraction,
        }
    }
}
