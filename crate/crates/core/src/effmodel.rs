//! Physical experiment parameters and the effective optomechanical model they
//! reduce to.
//!
//! The fermions fill every momentum state in `[-k_F, k_F]`. Photon recoil
//! promotes states in a `2K` window below `±k_F` by `±2K`; the resulting
//! bosonic particle-hole modes oscillate at `ω_M = 2K v_F` and couple to the
//! intracavity photon number with `g = U_0 / (4β)`, `β = sqrt(π / (K L))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// How the optical wavenumber is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveSpec {
    /// Wavenumber `K` in rad/m.
    Wavenumber(f64),
    /// Vacuum wavelength in m; `K = 2π/λ`.
    Wavelength(f64),
}

impl WaveSpec {
    pub fn wavenumber(&self) -> f64 {
        match *self {
            WaveSpec::Wavenumber(k) => k,
            WaveSpec::Wavelength(l) => 2.0 * PI / l,
        }
    }
}

/// Dispersive atom-field coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `U_0` given directly (rad/s).
    Direct { u0: f64 },
    /// Single-photon Rabi frequency and pump-atom detuning `ω_L − ω_a` (both
    /// rad/s); `U_0 = g_0² / (ω_L − ω_a)`.
    Dispersive { rabi: f64, pump_atom_detuning: f64 },
}

impl Coupling {
    pub fn u0(&self) -> f64 {
        match *self {
            Coupling::Direct { u0 } => u0,
            Coupling::Dispersive { rabi, pump_atom_detuning } => {
                rabi * rabi / pump_atom_detuning
            }
        }
    }
}

/// Experimental inputs. Frequencies are angular (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub wave: WaveSpec,
    /// Cavity length `L` (m).
    pub cavity_length: f64,
    pub atom_number: u64,
    /// Atomic mass `M` (kg).
    pub atomic_mass: f64,
    pub coupling: Coupling,
    /// Cavity decay rate `κ`.
    pub kappa: f64,
    /// Drive rate `η`.
    pub eta: f64,
    /// Pump-cavity detuning `ω_L − ω_c`.
    pub pump_cavity_detuning: f64,
    /// Optional explicit `k_F / K`; overrides `k_F = πN/L` when present.
    pub kf_over_k: Option<f64>,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        }
        match self.wave {
            WaveSpec::Wavenumber(k) => positive("wavenumber", k)?,
            WaveSpec::Wavelength(l) => positive("wavelength", l)?,
        }
        positive("cavity_length", self.cavity_length)?;
        positive("atomic_mass", self.atomic_mass)?;
        positive("kappa", self.kappa)?;
        if self.atom_number == 0 {
            return Err(Error::invalid("atom_number", "must be a positive integer"));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::invalid("eta", format!("must be finite and >= 0, got {}", self.eta)));
        }
        if !self.pump_cavity_detuning.is_finite() {
            return Err(Error::invalid("pump_cavity_detuning", "must be finite"));
        }
        match self.coupling {
            Coupling::Direct { u0 } => {
                if !u0.is_finite() {
                    return Err(Error::invalid("u0", "must be finite"));
                }
            }
            Coupling::Dispersive { rabi, pump_atom_detuning } => {
                positive("rabi", rabi)?;
                if pump_atom_detuning == 0.0 || !pump_atom_detuning.is_finite() {
                    return Err(Error::invalid(
                        "pump_atom_detuning",
                        "must be finite and nonzero (ω_L = ω_a is resonant)",
                    ));
                }
            }
        }
        if let Some(r) = self.kf_over_k {
            positive("kf_over_k", r)?;
        }
        Ok(())
    }
}

/// The three parameters of the generic optomechanical Hamiltonian that every
/// downstream module needs: mechanical frequency, single-photon coupling and
/// cavity decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptomechParams {
    pub omega_m: f64,
    pub g: f64,
    pub kappa: f64,
}

impl OptomechParams {
    pub fn new(omega_m: f64, g: f64, kappa: f64) -> Self {
        Self { omega_m, g, kappa }
    }

    /// Kerr-like shift per photon, `χ = 4g²/ω_M`.
    pub fn chi(&self) -> f64 {
        4.0 * self.g * self.g / self.omega_m
    }
}

/// Derived optomechanical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    /// Optical wavenumber `K` (rad/m).
    pub k: f64,
    /// Fermi momentum `k_F` (rad/m).
    pub k_f: f64,
    /// Fermi velocity (m/s).
    pub v_f: f64,
    /// Fermi frequency `ħ k_F² / 2M`.
    pub omega_f: f64,
    /// Bosonization normalization `β = sqrt(π / (K L))`.
    pub beta: f64,
    pub omega_m: f64,
    pub g: f64,
    /// Effective cavity detuning `Δ = (ω_c − ω_L) + U_0 N / 2`.
    pub delta: f64,
    pub kappa: f64,
    pub eta: f64,
    pub u0: f64,
    pub cavity_length: f64,
    pub atomic_mass: f64,
    pub atom_number: u64,
}

impl EffectiveModel {
    pub fn optomech(&self) -> OptomechParams {
        OptomechParams::new(self.omega_m, self.g, self.kappa)
    }

    pub fn chi(&self) -> f64 {
        self.optomech().chi()
    }
}

pub fn build_effective_model(p: &PhysicalParams) -> Result<EffectiveModel> {
    p.validate()?;
    let k = p.wave.wavenumber();
    let l = p.cavity_length;
    let n = p.atom_number as f64;
    let k_f = match p.kf_over_k {
        Some(ratio) => ratio * k,
        None => PI * n / l,
    };
    let v_f = HBAR * k_f / p.atomic_mass;
    let omega_f = HBAR * k_f * k_f / (2.0 * p.atomic_mass);
    let beta = (PI / (k * l)).sqrt();
    let u0 = p.coupling.u0();
    Ok(EffectiveModel {
        k,
        k_f,
        v_f,
        omega_f,
        beta,
        omega_m: 2.0 * k * v_f,
        g: u0 / (4.0 * beta),
        delta: -p.pump_cavity_detuning + u0 * n / 2.0,
        kappa: p.kappa,
        eta: p.eta,
        u0,
        cavity_length: l,
        atomic_mass: p.atomic_mass,
        atom_number: p.atom_number,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Warn,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub k_over_kf_warn: f64,
    pub recoil_over_omega_m_warn: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { k_over_kf_warn: 0.2, recoil_over_omega_m_warn: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub status: Status,
}

/// Diagnostics for the approximations behind the effective Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub k_over_kf: f64,
    /// Side-mode recoil frequency `ħ(2K)²/(2M)`.
    pub recoil: f64,
    pub recoil_over_omega_m: f64,
    /// Number of particle-hole states in the `2K` window, `KL/π`.
    pub capacity: f64,
    pub omega_f: f64,
    pub checks: Vec<RegimeCheck>,
    pub status: Status,
}

pub fn validate_regime(m: &EffectiveModel, t: &RegimeThresholds) -> RegimeReport {
    let k_over_kf = m.k / m.k_f;
    let recoil = HBAR * (2.0 * m.k).powi(2) / (2.0 * m.atomic_mass);
    let recoil_over_omega_m = recoil / m.omega_m;
    let capacity = m.k * m.cavity_length / PI;

    let linearization = if k_over_kf >= 1.0 {
        Status::Fail
    } else if k_over_kf > t.k_over_kf_warn {
        Status::Warn
    } else {
        Status::Ok
    };
    let recoil_status = if recoil_over_omega_m > t.recoil_over_omega_m_warn {
        Status::Warn
    } else {
        Status::Ok
    };
    let checks = vec![
        RegimeCheck {
            name: "k_over_kf".into(),
            value: k_over_kf,
            threshold: t.k_over_kf_warn,
            status: linearization,
        },
        RegimeCheck {
            name: "recoil_over_omega_m".into(),
            value: recoil_over_omega_m,
            threshold: t.recoil_over_omega_m_warn,
            status: recoil_status,
        },
    ];
    let status = checks.iter().map(|c| c.status).max().unwrap_or(Status::Ok);
    RegimeReport {
        k_over_kf,
        recoil,
        recoil_over_omega_m,
        capacity,
        omega_f: m.omega_f,
        checks,
        status,
    }
}
