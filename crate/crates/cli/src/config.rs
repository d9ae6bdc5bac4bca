//! JSON run configuration for `fit`. Flags on the command line override
//! values read from the file; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trde::datasets::SplitFractions;
use trde::{Optimizer, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Toy family name; exclusive with `csv`.
    pub toy: Option<String>,
    pub csv: Option<PathBuf>,
    pub header: bool,
    /// Rows generated for a toy family.
    pub n: usize,
    /// Toy noise; the family default when absent.
    pub noise: Option<f64>,
    pub validation: f64,
    pub test: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let f = SplitFractions::default();
        DatasetConfig {
            toy: None,
            csv: None,
            header: false,
            n: 62_500,
            noise: None,
            validation: f.validation,
            test: f.test,
        }
    }
}

impl DatasetConfig {
    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            validation: self.validation,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub k_basis: usize,
    pub rank: usize,
    pub components: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k_basis: 64,
            rank: 6,
            components: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// `sgd`/`plain-sgd` or `adam`/`adaptive-moment`.
    pub optimizer: String,
    pub grad_clip: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            optimizer: t.optimizer.to_string(),
            grad_clip: t.grad_clip,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// The seed, which must have come from the file or a flag.
    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::usage("a seed is required (--seed or `seed` in the config)"))
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let optimizer: Optimizer = self.train.optimizer.parse().map_err(|e: trde::Error| CliError::usage(e.to_string()))?;
        let config = TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed: self.seed()?,
            optimizer,
            grad_clip: self.train.grad_clip,
        };
        config.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        match (&self.dataset.toy, &self.dataset.csv) {
            (Some(_), Some(_)) => return Err(CliError::usage("give either a toy family or a CSV, not both")),
            (None, None) => return Err(CliError::usage("no dataset: give --toy or --csv")),
            _ => {}
        }
        let m = &self.model;
        if m.k_basis < 4 {
            return Err(CliError::usage(format!("k_basis must be at least 4, got {}", m.k_basis)));
        }
        if m.rank == 0 || m.components == 0 {
            return Err(CliError::usage("rank and components must be at least 1"));
        }
        self.train_config()?;
        Ok(())
    }
}
