//! Experiment configuration file (TOML) and run manifests.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/main"
//!
//! [data]
//! walks = "runs/data/walks.jsonl"
//!
//! [generation]
//! subjects_ds1 = 38
//! subjects_ds2 = 12
//!
//! [preprocess]
//! normalization = "per_video"
//!
//! [model]
//! lr = 1e-3
//! epochs = 60
//!
//! [eval]
//! k = 10
//! variants = ["main", "mirror", "lower_body", "per_frame"]
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{fingerprint, Variant};
use crate::model::Pose2GaitConfig;
use crate::preprocess::PreprocessConfig;
use crate::synthgait::GenerationConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Walk file used by `baseline`, `evaluate`, `ablate` and `predict`,
    /// and split into train/validation by `train` when the two files below
    /// are not given.
    pub walks: Option<PathBuf>,
    pub train_walks: Option<PathBuf>,
    pub val_walks: Option<PathBuf>,
    /// Model file read by `predict`; defaults to `<output_dir>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub k: usize,
    pub variants: Vec<Variant>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            variants: vec![Variant::Main, Variant::Mirror, Variant::LowerBody, Variant::PerFrame],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed for generation, fold assignment and training.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub generation: GenerationConfig,
    pub preprocess: PreprocessConfig,
    pub model: Pose2GaitConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            generation: GenerationConfig::default(),
            preprocess: PreprocessConfig::default(),
            model: Pose2GaitConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a run manifest, or a bare config, written as JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: ExperimentConfig = if value.get("config").is_some() {
            serde_json::from_value::<Manifest>(value).map(|m| m.config)
        } else {
            serde_json::from_value(value)
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a TOML config, or a JSON manifest from an earlier run.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("[{section}] {m}")),
                other => Error::Config(format!("[{section}] {other}")),
            })
        };
        wrap("generation", self.generation.validate())?;
        wrap("preprocess", self.preprocess.validate())?;
        wrap("model", self.model.validate())?;
        if self.eval.k < 2 {
            return Err(Error::Config(format!("[eval] k must be at least 2, got {}", self.eval.k)));
        }
        Ok(())
    }

    /// Override the master seed; the model seed follows it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.data
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.ckpt"))
    }
}

/// Written beside every run's outputs. Holds the fully resolved config, so
/// it can be fed back as `--config` to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_fingerprint: String,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, outputs: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config_fingerprint: config.fingerprint(),
            outputs,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.command));
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
