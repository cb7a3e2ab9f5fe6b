//! Run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skelact::neural_core::{ModelConfig, OptimizerConfig};
use skelact::pose_ingest::PreprocessConfig;
use skelact::sequence_ops::{AugmentSpec, DfdConfig};
use skelact::training::{EvalSplit, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Dataset file to train on.
    pub dataset: PathBuf,
    /// Separate test set. When absent, `train.test_split` carves one out of `dataset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: Option<usize>,
    pub apply_dfd: bool,
    pub optimizer: OptimizerConfig,
    /// Held-out test clips, used when no test dataset is given.
    pub test_split: EvalSplit,
    /// Fraction of the remaining clips used for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub bootstrap_trials: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainOptions {
            epochs: t.epochs,
            batch_size: t.batch_size,
            patience: t.patience,
            apply_dfd: t.apply_dfd,
            optimizer: t.optimizer,
            test_split: EvalSplit::Fraction { fraction: 0.5 },
            validation_fraction: 0.1,
            bootstrap_trials: t.bootstrap_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub dfd: DfdConfig,
    #[serde(default)]
    pub augment: AugmentSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainOptions,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::parse(&text)
    }

    /// Check every field. `model.n_classes` is checked later against the dataset.
    pub fn validate(&self) -> Result<(), CliError> {
        self.preprocess.validate()?;
        self.model.validate()?;
        self.train_config().validate()?;
        let v = self.train.validation_fraction;
        if !(0.0..1.0).contains(&v) {
            return Err(CliError::Validation(format!(
                "validation_fraction must be in [0, 1), got {v}"
            )));
        }
        self.train.test_split.validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            patience: t.patience,
            apply_dfd: t.apply_dfd,
            dfd: self.dfd,
            augment: self.augment,
            optimizer: t.optimizer,
            split: EvalSplit::Fraction {
                fraction: t.validation_fraction,
            },
            bootstrap_trials: t.bootstrap_trials,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
