//! Benchmark fixtures shared by the criterion targets.

use fermimirror::{build_effective_model, Coupling, OptomechParams, PhysicalParams, WaveSpec};
use std::f64::consts::PI;

/// Reference parameters in the bistable regime.
pub fn reference() -> OptomechParams {
    let p = PhysicalParams {
        wave: WaveSpec::Wavenumber(1.0e7),
        cavity_length: 100e-6,
        atom_number: 5000,
        atomic_mass: 1.5e-25,
        coupling: Coupling::Direct { u0: 2.0 * PI * 20e3 },
        kappa: 2.0 * PI * 1e6,
        eta: 0.0,
        pump_cavity_detuning: 2.0 * PI * 47.5e6,
        kf_over_k: Some(12.5),
    };
    build_effective_model(&p).expect("reference parameters are valid").optomech()
}
