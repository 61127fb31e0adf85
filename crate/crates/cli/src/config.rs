//! JSON run configuration.
//!
//! Frequencies in the file are ordinary frequencies and every such key ends in
//! `_hz`; [`RunConfig::physical_params`] and friends convert them to rad/s.
//! Ranges for sweeps, drives and frequency grids are given in units of `κ`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use fermimirror::edlab::{EdConfig, DEFAULT_DIM_CAP};
use fermimirror::{Coupling, PhysicalParams, RegimeThresholds, WaveSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted path of the offending field, empty for document-level errors.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config: {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

fn hz(v: f64) -> f64 {
    2.0 * PI * v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    /// Optical wavenumber `K` (rad/m). Exactly one of this and `wavelength`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    pub cavity_length: f64,
    pub atom_number: u64,
    pub atomic_mass: f64,
    /// Either `u0_hz`, or `rabi_hz` together with `pump_atom_detuning_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_atom_detuning_hz: Option<f64>,
    pub kappa_hz: f64,
    #[serde(default)]
    pub eta_hz: f64,
    pub pump_cavity_detuning_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kf_over_k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    #[serde(default = "default_warn")]
    pub k_over_kf_warn: f64,
    #[serde(default = "default_warn")]
    pub recoil_over_omega_m_warn: f64,
}

fn default_warn() -> f64 {
    0.2
}

impl Default for RegimeSection {
    fn default() -> Self {
        Self { k_over_kf_warn: default_warn(), recoil_over_omega_m_warn: default_warn() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Eta,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySection {
    pub eta_over_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVar,
    pub from_over_kappa: f64,
    pub to_over_kappa: f64,
    pub steps: usize,
    /// Drive held fixed during a detuning sweep; defaults to the physical `eta_hz`.
    #[serde(default)]
    pub eta_over_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub eta_over_kappa: Option<f64>,
    /// Index into the steady states sorted by photon number.
    #[serde(default)]
    pub branch: usize,
    pub omega_from_over_kappa: f64,
    pub omega_to_over_kappa: f64,
    pub points: usize,
    #[serde(default = "default_convention")]
    pub convention: String,
}

fn default_convention() -> String {
    "vacuum".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Linear,
    Meanfield,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: SimMode,
    pub eta_over_kappa: Option<f64>,
    #[serde(default)]
    pub branch: usize,
    /// `κ·dt`.
    pub dt_kappa: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub ensemble: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default = "default_sim_convention")]
    pub convention: String,
    /// Relative offset applied to the steady state for mean-field runs.
    #[serde(default)]
    pub perturbation: f64,
    /// Welch segments for the ensemble spectrum of linear runs.
    #[serde(default)]
    pub segments: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_sim_convention() -> String {
    "symmetric".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdSection {
    pub modes: usize,
    pub n_f: usize,
    #[serde(default)]
    pub n_ph: usize,
    pub m: u32,
    pub u0_hz: f64,
    #[serde(default)]
    pub delta_hz: f64,
    pub atomic_mass: f64,
    pub cavity_length: f64,
    #[serde(default = "default_cap")]
    pub dim_cap: usize,
    /// Number of lowest levels reported per photon sector.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_cap() -> usize {
    DEFAULT_DIM_CAP
}

fn default_levels() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physical: Option<PhysicalSection>,
    #[serde(default)]
    pub regime: RegimeSection,
    pub steady: Option<SteadySection>,
    pub sweep: Option<SweepSection>,
    pub spectrum: Option<SpectrumSection>,
    pub simulate: Option<SimulateSection>,
    pub edcheck: Option<EdSection>,
    pub output_dir: Option<String>,
}

/// Rewrites serde's unknown-field message when the key is a frequency that
/// lacks its `_hz` suffix.
fn unit_suffix_hint(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    let name = &rest[..rest.find('`')?];
    let suffixed = format!("`{name}_hz`");
    message.contains(&suffixed).then(|| {
        format!("frequency key `{name}` must carry the unit suffix: use {suffixed} (in Hz)")
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let message = unit_suffix_hint(&inner).unwrap_or(inner);
        err(&path, message)
    })?;
    cfg.check()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(err(path, "must be finite"))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(err(path, format!("must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    fn check(&self) -> Result<(), ConfigError> {
        if let Some(p) = &self.physical {
            p.to_params()?;
        }
        if let Some(s) = &self.sweep {
            finite("sweep.from_over_kappa", s.from_over_kappa)?;
            finite("sweep.to_over_kappa", s.to_over_kappa)?;
            if s.steps < 2 {
                return Err(err("sweep.steps", "need at least 2"));
            }
        }
        if let Some(s) = &self.spectrum {
            finite("spectrum.omega_from_over_kappa", s.omega_from_over_kappa)?;
            finite("spectrum.omega_to_over_kappa", s.omega_to_over_kappa)?;
            if s.points == 0 {
                return Err(err("spectrum.points", "must be >= 1"));
            }
        }
        if let Some(s) = &self.simulate {
            positive("simulate.dt_kappa", s.dt_kappa)?;
            finite("simulate.perturbation", s.perturbation)?;
        }
        if let Some(e) = &self.edcheck {
            positive("edcheck.atomic_mass", e.atomic_mass)?;
            positive("edcheck.cavity_length", e.cavity_length)?;
            finite("edcheck.u0_hz", e.u0_hz)?;
            finite("edcheck.delta_hz", e.delta_hz)?;
        }
        positive("regime.k_over_kf_warn", self.regime.k_over_kf_warn)?;
        positive("regime.recoil_over_omega_m_warn", self.regime.recoil_over_omega_m_warn)?;
        Ok(())
    }

    pub fn physical(&self) -> Result<&PhysicalSection, ConfigError> {
        self.physical.as_ref().ok_or_else(|| err("physical", "section required by this command"))
    }

    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds {
            k_over_kf_warn: self.regime.k_over_kf_warn,
            recoil_over_omega_m_warn: self.regime.recoil_over_omega_m_warn,
        }
    }
}

impl PhysicalSection {
    /// Angular-frequency parameters; the only place `_hz` values are scaled.
    pub fn to_params(&self) -> Result<PhysicalParams, ConfigError> {
        let wave = match (self.wavenumber, self.wavelength) {
            (Some(k), None) => WaveSpec::Wavenumber(k),
            (None, Some(l)) => WaveSpec::Wavelength(l),
            _ => return Err(err("physical", "give exactly one of `wavenumber` and `wavelength`")),
        };
        let coupling = match (self.u0_hz, self.rabi_hz, self.pump_atom_detuning_hz) {
            (Some(u0), None, None) => Coupling::Direct { u0: hz(u0) },
            (None, Some(r), Some(d)) => Coupling::Dispersive { rabi: hz(r), pump_atom_detuning: hz(d) },
            _ => {
                return Err(err(
                    "physical",
                    "give either `u0_hz` or both `rabi_hz` and `pump_atom_detuning_hz`",
                ))
            }
        };
        let p = PhysicalParams {
            wave,
            cavity_length: self.cavity_length,
            atom_number: self.atom_number,
            atomic_mass: self.atomic_mass,
            coupling,
            kappa: hz(self.kappa_hz),
            eta: hz(self.eta_hz),
            pump_cavity_detuning: hz(self.pump_cavity_detuning_hz),
            kf_over_k: self.kf_over_k,
        };
        p.validate().map_err(|e| match e {
            fermimirror::Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "kappa" | "eta" | "pump_cavity_detuning" | "u0" | "rabi" | "pump_atom_detuning" => {
                        format!("physical.{name}_hz")
                    }
                    other => format!("physical.{other}"),
                };
                err(&key, reason)
            }
            other => err("physical", other.to_string()),
        })?;
        Ok(p)
    }
}

impl EdSection {
    pub fn to_config(&self) -> EdConfig {
        let mut c = EdConfig::centered(
            self.modes,
            self.n_f,
            self.n_ph,
            self.m,
            hz(self.u0_hz),
            hz(self.delta_hz),
            self.atomic_mass,
            self.cavity_length,
        );
        c.dim_cap = self.dim_cap;
        c
    }
}
