//! Pipeline configuration, read from and written to TOML.
//!
//! Every section is optional in the file and falls back to its defaults;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::g2::HbtParams;
use crate::postproc::ldpc::{
    LdpcCode, DEFAULT_BLOCK_LENGTH, DEFAULT_CODE_SEED, DEFAULT_MAX_ITERATIONS,
};
use crate::postproc::KeyLengthParams;
use crate::receiver::{ChannelParams, DetectorParams};
use crate::sifting::SiftConfig;
use crate::source::{SourceParams, DEFAULT_HERALD_DELAY_PS};
use crate::transmitter::{EncoderParams, PathDelayTable};

/// Alice and Bob's sifting knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftParams {
    /// Full-width coincidence window.
    pub window_ps: u64,
    /// Channel delay assumed by sifting; may differ from the simulated one.
    pub delta_ch_ps: u64,
    pub herald_delay_ps: u64,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            window_ps: 1_500,
            delta_ch_ps: 2_500,
            herald_delay_ps: DEFAULT_HERALD_DELAY_PS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocParams {
    /// Fraction of the sifted key disclosed for error estimation.
    pub qber_sample_fraction: f64,
    pub ldpc_block_length: usize,
    pub ldpc_column_weight: usize,
    pub ldpc_row_weight: usize,
    pub ldpc_code_seed: u64,
    pub ldpc_max_iterations: usize,
    /// Lower bound on the error rate handed to the decoder.
    pub decoder_min_qber: f64,
    /// Measured heralded g2(0) entering the multi-photon correction.
    pub g2_zero: f64,
    pub heralded_mean_photon_number: f64,
    pub epsilon_sec: f64,
    pub ec_efficiency: f64,
}

impl Default for PostprocParams {
    fn default() -> Self {
        let key = KeyLengthParams::default();
        Self {
            qber_sample_fraction: 0.1,
            ldpc_block_length: DEFAULT_BLOCK_LENGTH,
            ldpc_column_weight: 3,
            ldpc_row_weight: 6,
            ldpc_code_seed: DEFAULT_CODE_SEED,
            ldpc_max_iterations: DEFAULT_MAX_ITERATIONS,
            decoder_min_qber: 1e-3,
            g2_zero: 0.0408,
            heralded_mean_photon_number: 1.0,
            epsilon_sec: key.epsilon_sec,
            ec_efficiency: key.ec_efficiency,
        }
    }
}

impl PostprocParams {
    pub fn key_length(&self) -> KeyLengthParams {
        KeyLengthParams {
            epsilon_sec: self.epsilon_sec,
            ec_efficiency: self.ec_efficiency,
        }
    }

    pub fn ldpc_code(&self) -> Result<LdpcCode> {
        if self.ldpc_block_length == DEFAULT_BLOCK_LENGTH
            && (self.ldpc_column_weight, self.ldpc_row_weight) == (3, 6)
            && self.ldpc_code_seed == DEFAULT_CODE_SEED
        {
            return Ok(LdpcCode::default_half_rate());
        }
        LdpcCode::regular(
            self.ldpc_block_length,
            self.ldpc_column_weight,
            self.ldpc_row_weight,
            self.ldpc_code_seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.qber_sample_fraction > 0.0 && self.qber_sample_fraction < 1.0) {
            return Err(Error::config(
                "postproc.qber_sample_fraction must lie in (0, 1)",
            ));
        }
        if self.ldpc_max_iterations == 0 {
            return Err(Error::config("postproc.ldpc_max_iterations must be > 0"));
        }
        if !(self.decoder_min_qber > 0.0 && self.decoder_min_qber < 0.5) {
            return Err(Error::config(
                "postproc.decoder_min_qber must lie in (0, 0.5)",
            ));
        }
        if !(self.g2_zero.is_finite() && self.g2_zero >= 0.0) {
            return Err(Error::config("postproc.g2_zero must be >= 0"));
        }
        if !(self.heralded_mean_photon_number.is_finite()
            && self.heralded_mean_photon_number >= 0.0)
        {
            return Err(Error::config(
                "postproc.heralded_mean_photon_number must be >= 0",
            ));
        }
        if self.epsilon_sec.is_nan() || self.epsilon_sec <= 0.0 {
            return Err(Error::config("postproc.epsilon_sec must be > 0"));
        }
        if self.ec_efficiency.is_nan() || self.ec_efficiency < 1.0 {
            return Err(Error::config("postproc.ec_efficiency must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub duration_s: f64,
    /// Master seed. TOML integers are signed, so values above `i64::MAX`
    /// cannot be written to a config file.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub source: SourceParams,
    pub table: PathDelayTable,
    pub encoder: EncoderParams,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    pub sift: SiftParams,
    pub postproc: PostprocParams,
    pub hbt: HbtParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            seed: 1,
            output_dir: None,
            source: SourceParams::default(),
            table: PathDelayTable::default(),
            encoder: EncoderParams::default(),
            channel: ChannelParams::default(),
            detector: DetectorParams::default(),
            sift: SiftParams::default(),
            postproc: PostprocParams::default(),
            hbt: HbtParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration_s * 1e12).round() as u64
    }

    pub fn sift_config(&self) -> SiftConfig {
        SiftConfig {
            window_ps: self.sift.window_ps,
            delta_ch_ps: self.sift.delta_ch_ps,
            herald_delay_ps: self.sift.herald_delay_ps,
            table: self.table.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config("duration_s must be > 0"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed must not exceed 9223372036854775807"));
        }
        self.source.validate()?;
        self.encoder.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        self.postproc.validate()?;
        self.hbt.validate()?;
        self.sift_config().validate()?;
        if self.sift.herald_delay_ps != self.source.herald_delay_ps {
            return Err(Error::config(format!(
                "sift.herald_delay_ps ({}) differs from source.herald_delay_ps ({})",
                self.sift.herald_delay_ps, self.source.herald_delay_ps
            )));
        }
        Ok(())
    }
}
