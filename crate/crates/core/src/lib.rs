//! Simulation toolkit for a degenerate Fermi gas acting as the moving mirror of
//! a driven Fabry-Pérot cavity.
//!
//! The collective particle-hole density oscillation at momentum `2K` behaves as
//! a mechanical oscillator of frequency `ω_M = 2K v_F` coupled to the cavity
//! photon number with strength `g = U_0 / (4β)`. The crate covers:
//!
//! * [`effmodel`]: physical inputs to effective optomechanical parameters,
//!   plus a validity-regime audit.
//! * [`steady`]: mean-field steady states (a cubic in the photon number),
//!   sweeps, the bistability cusp and hysteresis traces.
//! * [`stability`]: the 4×4 drift matrix of the linearized Langevin equations
//!   and branch classification.
//! * [`spectra`]: quadrature noise spectra via the transfer matrix, plus the
//!   closed-form expressions for cross-checking.
//! * [`dynamics`]: fixed-step mean-field integration, Euler–Maruyama for the
//!   linearized Langevin equations and a Welch periodogram.
//! * [`edlab`]: exact diagonalization of the truncated fermion+photon
//!   Hamiltonian and checks of the bosonization identities.
//!
//! All frequencies are angular (rad/s) unless a name says otherwise.

pub mod cubic;
pub mod dynamics;
pub mod edlab;
pub mod effmodel;
pub mod error;
pub mod spectra;
pub mod stability;
pub mod steady;

pub use dynamics::{SimConfig, Spectrum, Trajectory};
pub use edlab::{EdConfig, EdSystem};
pub use effmodel::{
    build_effective_model, validate_regime, Coupling, EffectiveModel, OptomechParams,
    PhysicalParams, RegimeReport, RegimeThresholds, Status, WaveSpec, HBAR,
};
pub use error::{Error, Result};
pub use spectra::{NoiseConvention, SpectrumPoint};
pub use stability::{DriftMatrix, StabilityClass, StabilityVerdict};
pub use steady::{BistabilityCurve, SteadyStateBranch, SweepVariable, Threshold};
