//! Run configuration, read from TOML in experiment-facing units (MHz, kHz,
//! multiples of τ) and converted to SI angular units at the boundary.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::TimeGrid;
use crate::error::{Error, Result};
use crate::hilbert::ModelParams;
use crate::measure::REFERENCE_RATE_TAU;
use crate::qpn::{NoiseModel, QpnConfig, Repetitions, DEFAULT_REPLICAS, REFERENCE_REPETITIONS};

pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Where CSVs are written. Not part of the provenance hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub qpn: QpnSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// ω_z/2π in MHz.
    pub omega_z_mhz: f64,
    /// ω_E/2π in MHz.
    pub omega_e_mhz: f64,
    /// Ω/2π in kHz.
    pub omega_khz: f64,
    pub eta: f64,
    pub nbar: f64,
    #[serde(default = "default_n_cut")]
    pub n_cut: usize,
    #[serde(default = "default_n_pad")]
    pub n_pad: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Window length in units of τ.
    pub t_max_tau: f64,
    /// Uniform samples on `[0, t_max]`, endpoints included.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Explicit time unit in µs; required when Ω = 0 makes τ infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_us: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpnSection {
    #[serde(default = "default_r")]
    pub r: Repetitions,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_replicas")]
    pub k_series: usize,
    #[serde(default = "default_replicas")]
    pub k_measure: usize,
}

impl Default for QpnSection {
    fn default() -> Self {
        Self {
            r: default_r(),
            noise: NoiseModel::default(),
            k_series: DEFAULT_REPLICAS,
            k_measure: DEFAULT_REPLICAS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    /// Sampling rates γτ.
    pub gamma_tau: Vec<f64>,
    pub r: Vec<Repetitions>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// ω_z/2π in MHz.
    OmegaZ,
    Nbar,
    /// Sampling rate γτ.
    Gamma,
    /// Repetitions; `inf` for the noiseless limit.
    R,
    /// Window length in units of τ; replaces `t_max_tau`.
    TMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Windows evaluated for every value.
    #[serde(default = "default_windows")]
    pub t_max_tau: Vec<f64>,
}

fn default_n_cut() -> usize {
    ModelParams::DEFAULT_N_CUT
}

fn default_n_pad() -> usize {
    ModelParams::DEFAULT_N_PAD
}

fn default_samples() -> usize {
    136
}

fn default_r() -> Repetitions {
    Repetitions::Finite(REFERENCE_REPETITIONS)
}

fn default_replicas() -> usize {
    DEFAULT_REPLICAS
}

fn default_windows() -> Vec<f64> {
    vec![2.0, 5.0, 9.0]
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Reads a sweep value on the `r` axis.
pub fn repetitions_from_value(v: f64) -> Result<Repetitions> {
    if v == f64::INFINITY {
        Ok(Repetitions::Infinite)
    } else if v >= 1.0 && v.fract() == 0.0 && v < 9.0e15 {
        Ok(Repetitions::Finite(v as u64))
    } else {
        Err(config_err(format!("repetition count must be a positive integer or inf, got {v}")))
    }
}

impl RunConfig {
    /// Reference experiment: resonant spin, n̄ = 1.0, 136 samples over 9τ
    /// (γ₀ = 15/τ), r₀ = 500.
    pub fn reference() -> Self {
        Self {
            seed: 1,
            output_dir: None,
            model: ModelSection {
                omega_z_mhz: 1.920,
                omega_e_mhz: 1.920,
                omega_khz: 100.0,
                eta: 0.32,
                nbar: 1.0,
                n_cut: ModelParams::DEFAULT_N_CUT,
                n_pad: ModelParams::DEFAULT_N_PAD,
            },
            grid: GridSection {
                t_max_tau: 9.0,
                samples: default_samples(),
                tau_us: None,
            },
            qpn: QpnSection::default(),
            bias: None,
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Serialisation without `output_dir`, the text embedded in every CSV.
    pub fn canonical_toml(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.output_dir = None;
        copy.to_toml()
    }

    /// Hex SHA-256 of [`Self::canonical_toml`].
    pub fn config_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_toml()?.as_bytes())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(config_err(format!("seed must be <= {}, got {}", i64::MAX, self.seed)));
        }
        self.model_params()?;
        positive("grid.t_max_tau", self.grid.t_max_tau)?;
        if self.grid.samples < 2 {
            return Err(config_err("grid.samples must be >= 2"));
        }
        if let Some(t) = self.grid.tau_us {
            positive("grid.tau_us", t)?;
        }
        self.tau()?;
        self.qpn_config()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if let Some(bias) = &self.bias {
            if bias.gamma_tau.is_empty() || bias.r.is_empty() {
                return Err(config_err("bias.gamma_tau and bias.r must be non-empty"));
            }
            for &g in &bias.gamma_tau {
                positive("bias.gamma_tau", g)?;
            }
            if bias.r.contains(&Repetitions::Finite(0)) {
                return Err(config_err("bias.r entries must be >= 1"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_err("sweep.values must be non-empty"));
            }
            if sweep.axis != SweepAxis::TMax && sweep.t_max_tau.is_empty() {
                return Err(config_err("sweep.t_max_tau must be non-empty"));
            }
            for &w in &sweep.t_max_tau {
                positive("sweep.t_max_tau", w)?;
            }
            for &v in &sweep.values {
                match sweep.axis {
                    SweepAxis::OmegaZ => {
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(config_err(format!("omega_z sweep value {v} must be >= 0")));
                        }
                    }
                    SweepAxis::Nbar => {
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(config_err(format!("nbar sweep value {v} must be >= 0")));
                        }
                    }
                    SweepAxis::Gamma => positive("gamma sweep value", v)?,
                    SweepAxis::TMax => positive("t_max sweep value", v)?,
                    SweepAxis::R => {
                        repetitions_from_value(v)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::from_lab_units(
            m.omega_z_mhz,
            m.omega_e_mhz,
            m.omega_khz,
            m.eta,
            m.nbar,
            m.n_cut,
            m.n_pad,
        )
        .map_err(|e| config_err(e.to_string()))
    }

    /// Time unit in seconds: `grid.tau_us` if given, otherwise 2π/Ω.
    pub fn tau(&self) -> Result<f64> {
        let tau = match self.grid.tau_us {
            Some(us) => us * 1e-6,
            None => 2.0 * PI / (2.0 * PI * self.model.omega_khz * 1e3),
        };
        if tau > 0.0 && tau.is_finite() {
            Ok(tau)
        } else {
            Err(config_err("Omega = 0 leaves tau undefined; set grid.tau_us"))
        }
    }

    pub fn t_max(&self) -> Result<f64> {
        Ok(self.grid.t_max_tau * self.tau()?)
    }

    /// γ₀ = 15/τ, the reference rate behind the true-value estimate.
    pub fn gamma0(&self) -> Result<f64> {
        Ok(REFERENCE_RATE_TAU / self.tau()?)
    }

    /// Sampling rate `(samples - 1)/t_max` of the configured grid.
    pub fn sampling_rate(&self) -> Result<f64> {
        Ok((self.grid.samples - 1) as f64 / self.t_max()?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.t_max()?, self.grid.samples)
    }

    pub fn qpn_config(&self) -> QpnConfig {
        QpnConfig {
            repetitions: self.qpn.r,
            noise: self.qpn.noise,
            k_series: self.qpn.k_series,
            k_measure: self.qpn.k_measure,
            seed: self.seed,
        }
    }
}
