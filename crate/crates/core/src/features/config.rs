use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How the mixup weight is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixupMode {
    Off,
    /// lambda ~ Beta(0.5, 0.5).
    Beta,
    /// lambda = 0.5.
    Fixed,
}

impl FromStr for MixupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(MixupMode::Off),
            "beta" => Ok(MixupMode::Beta),
            "fixed" => Ok(MixupMode::Fixed),
            other => Err(format!("unknown mixup mode '{other}' (expected off, beta or fixed)")),
        }
    }
}

impl fmt::Display for MixupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixupMode::Off => "off",
            MixupMode::Beta => "beta",
            MixupMode::Fixed => "fixed",
        })
    }
}

/// Feature extraction and augmentation settings shared by teacher and student.
///
/// Parsed from a `key = value` text file. Any difference between the config
/// used at extraction and at training changes [`FeatureConfig::hash`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    /// STFT window and FFT length in samples.
    pub window: usize,
    pub hop: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
    /// Circular sample-level shift of the waveform.
    pub shift: bool,
    pub max_time_mask: usize,
    pub max_freq_mask: usize,
    pub mixup: MixupMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_mels: 64,
            window: 512,
            hop: 160,
            f_min: 0.0,
            f_max: 8_000.0,
            log_floor: 1e-10,
            shift: true,
            max_time_mask: 192,
            max_freq_mask: 24,
            mixup: MixupMode::Off,
        }
    }
}

impl FeatureConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text form; every field, fixed order.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        if self.n_mels == 0 {
            return fail("n_mels must be positive".into());
        }
        if self.window < 2 || self.hop == 0 {
            return fail(format!("bad window/hop {}/{}", self.window, self.hop));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return fail(format!(
                "mel range [{}, {}] must satisfy 0 <= f_min < f_max <= {nyquist}",
                self.f_min, self.f_max
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail(format!("log_floor must be positive, got {}", self.log_floor));
        }
        Ok(())
    }

    /// Frame count for a clip of `len` samples (no padding).
    pub fn num_frames(&self, len: usize) -> Option<usize> {
        (len >= self.window).then(|| 1 + (len - self.window) / self.hop)
    }

    /// The log-domain value used for silence and masked cells.
    pub fn log_floor_value(&self) -> f64 {
        self.log_floor.ln()
    }

    /// Same features with every augmentation disabled.
    pub fn without_augmentation(&self) -> Self {
        Self {
            shift: false,
            max_time_mask: 0,
            max_freq_mask: 0,
            mixup: MixupMode::Off,
            ..self.clone()
        }
    }
}
