//! Run configuration and its digest.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autonet::TrainConfig;
use crate::cspbase::{BaselineConfig, DEFAULT_PAIRS};
use crate::dsp::{BandSpec, DspError, Window, DEFAULT_ORDER, MU_BAND, DEFAULT_BANDS};
use crate::lrp::LrpRule;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("{0}")]
    Invalid(String),
}

/// Everything that influences results. Paths, worker counts and the plot
/// range do not and are left out of the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub dataset: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: Option<usize>,
    pub seed: u64,
    pub bands: Vec<BandSpec>,
    pub window: Window,
    pub filter_order: usize,
    pub lr: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub lrp_rule: LrpRule,
    pub csp_pairs: usize,
    pub baseline_band: BandSpec,
    /// Topography color range; presentation only, so not digested.
    #[serde(skip)]
    pub range: (f64, f64),
    pub include_rejected: bool,
}

pub const DEFAULT_RANGE: (f64, f64) = (-0.1, 0.1);

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            dataset: None,
            out: PathBuf::from("out"),
            jobs: None,
            seed: 0,
            bands: DEFAULT_BANDS.to_vec(),
            window: Window::default(),
            filter_order: DEFAULT_ORDER,
            lr: train.lr,
            iterations: train.iterations,
            batch_size: train.batch_size,
            lrp_rule: LrpRule::default(),
            csp_pairs: DEFAULT_PAIRS,
            baseline_band: MU_BAND,
            range: DEFAULT_RANGE,
            include_rejected: false,
        }
    }
}

/// 64-bit prefix of a SHA-256 over the canonical JSON of the result-relevant
/// fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigDigest(pub u64);

impl fmt::Display for ConfigDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl RunConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<(), ConfigError> {
        if self.bands.len() != crate::featmap::N_BANDS {
            return Err(ConfigError::Invalid(format!(
                "the network expects {} bands, got {}",
                crate::featmap::N_BANDS,
                self.bands.len()
            )));
        }
        for b in &self.bands {
            b.validate(sample_rate)?;
        }
        self.baseline_band.validate(sample_rate)?;
        self.window.validate()?;
        self.train_config(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.lrp_rule
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.csp_pairs == 0 {
            return Err(ConfigError::Invalid("CSP pairs must be at least 1".into()));
        }
        if !(self.range.0 < self.range.1) {
            return Err(ConfigError::Invalid(format!(
                "color range {} .. {} is empty",
                self.range.0, self.range.1
            )));
        }
        Ok(())
    }

    pub fn digest(&self) -> ConfigDigest {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let d = Sha256::digest(&canonical);
        ConfigDigest(u64::from_le_bytes(d[..8].try_into().unwrap()))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            band: self.baseline_band,
            window: self.window,
            pairs: self.csp_pairs,
            order: self.filter_order,
            include_rejected: self.include_rejected,
        }
    }
}
