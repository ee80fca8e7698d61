//! Experiment configuration, presets and TOML I/O.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelConfig;
use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::pilot::PilotConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    /// One predictor per subcarrier, `n_tr` rows each.
    Sl,
    /// SL with only `n_tr_joint` rows per subcarrier (same time overhead as JL).
    SlShort,
    /// One predictor pooled over subcarriers.
    Jl,
    /// One predictor pooled over antenna-domain series.
    Jldt,
    /// `ĥ_{n+1} = g_n`, no training.
    Persistence,
}

impl Approach {
    pub const ALL: [Approach; 5] = [
        Approach::Sl,
        Approach::SlShort,
        Approach::Jl,
        Approach::Jldt,
        Approach::Persistence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Sl => "sl",
            Approach::SlShort => "sl-short",
            Approach::Jl => "jl",
            Approach::Jldt => "jldt",
            Approach::Persistence => "persistence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n0: usize,
    /// SL training rows per subcarrier.
    pub n_tr: usize,
    /// JL/JLDT training rows per series.
    pub n_tr_joint: usize,
    pub n_te: usize,
    pub n_gap: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n0: 3,
            n_tr: 1000,
            n_tr_joint: 20,
            n_te: 200,
            n_gap: 1500,
        }
    }
}

impl DatasetConfig {
    pub fn spec(&self, n_tr: usize) -> DatasetSpec {
        DatasetSpec {
            n0: self.n0,
            n_tr,
            n_te: self.n_te,
            n_gap: self.n_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 1000,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationConfig {
    pub n_avg: usize,
    pub max_shift: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            n_avg: 2000,
            max_shift: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Base seed; `seeds` lists the realizations a sweep averages over.
    pub seeds: Vec<u64>,
    pub snr_db: Vec<f64>,
    pub approaches: Vec<Approach>,
    pub channel: ChannelConfig,
    pub pilot: PilotConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainingConfig,
    pub correlation: CorrelationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            approaches: vec![Approach::Sl, Approach::SlShort, Approach::Jl, Approach::Jldt],
            channel: ChannelConfig::default(),
            pilot: PilotConfig::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            train: TrainingConfig::default(),
            correlation: CorrelationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-scale settings: 8x8 UPA, 50 subcarriers, 1000 epochs.
    Paper,
    /// Small settings for quick runs: 4x4 UPA, 16 subcarriers, 200 epochs.
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(Preset::Paper),
            "desk" => Some(Preset::Desk),
            _ => None,
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        if self == Preset::Desk {
            c.channel.m_h = 4;
            c.channel.m_v = 4;
            c.channel.subcarriers = 16;
            c.dataset.n_tr = 160;
            c.dataset.n_tr_joint = 10;
            c.train.epochs = 200;
        }
        c
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.channel.validate()?;
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.approaches.is_empty() {
            return bad("approaches must not be empty".into());
        }
        if self.pilot.tau == 0 || self.pilot.column >= self.pilot.tau {
            return bad(format!(
                "pilot.column must be < pilot.tau (got column={}, tau={})",
                self.pilot.column, self.pilot.tau
            ));
        }
        let d = &self.dataset;
        d.spec(d.n_tr).validate().map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("dataset: {m}")),
            other => other,
        })?;
        if d.n_tr_joint == 0 {
            return bad("dataset.n_tr_joint must be >= 1".into());
        }
        if d.n_tr_joint * self.channel.subcarriers != d.n_tr {
            return bad(format!(
                "dataset.n_tr ({}) must equal n_tr_joint * subcarriers ({} * {}) so SL and JL see the same amount of data",
                d.n_tr, d.n_tr_joint, self.channel.subcarriers
            ));
        }
        if self.model.hidden.contains(&0) {
            return bad("model.hidden sizes must be >= 1".into());
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return bad("train.batch_size and train.epochs must be >= 1".into());
        }
        if !(self.train.learning_rate >= 0.0) || !self.train.learning_rate.is_finite() {
            return bad(format!("train.learning_rate must be finite and >= 0 (got {})", self.train.learning_rate));
        }
        if self.correlation.n_avg == 0 {
            return bad("correlation.n_avg must be >= 1".into());
        }
        Ok(())
    }

    /// Blocks to synthesize so every dataset fits.
    pub fn blocks(&self) -> usize {
        self.dataset.spec(self.dataset.n_tr).required_blocks()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Short SHA-256 of the effective TOML.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
