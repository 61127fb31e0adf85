//! Quadrature noise spectra of a stable steady state.
//!
//! With `f(t) = ∫dω e^{−iωt} f[ω]` the linearized equations give
//! `f[ω] = G(ω) ξ[ω]`, `G(ω) = (−iω − J)⁻¹`, and for input noise correlations
//! `⟨ξ_k[ω] ξ_l[ω′]⟩ = Ξ_kl δ(ω + ω′)` the spectral matrix is
//! `S(ω) = G(ω) Ξ G(−ω)ᵀ = G Ξ G^H`. `Ξ` is zero except for its optical block,
//! `2κ N`, where `N` is the [`NoiseConvention`] matrix for `(δX_in, δP_in)`.
//!
//! The transfer-matrix result is authoritative. [`closed_form_spectrum`] evaluates
//! the closed-form expressions term by term for cross-checks; its optical
//! quadratures carry an extra `|d[ω]|²` in the denominator and do not reduce
//! to the empty-cavity Lorentzian at `g = 0`. [`corrected_spectrum`] swaps that
//! denominator for `|(κ − iω)² + Δ̃²|²`, which restores the limit.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::effmodel::OptomechParams;
use crate::error::{Error, Result};
use crate::stability::{self, DriftMatrix, StabilityClass};
use crate::steady::SteadyStateBranch;

/// Reciprocal condition number below which `−iω − J` counts as singular.
const SINGULAR_RCOND: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionKind {
    /// `⟨c_in c_in†⟩` only (antinormally ordered vacuum). Reproduces the
    /// closed-form mechanical spectrum exactly.
    Vacuum,
    /// `⟨c_in† c_in⟩` only, at half the vacuum weight.
    NormalOrdered,
    /// Real, equal quadrature noise with no cross terms.
    Symmetric,
    Custom,
}

/// Input-noise correlation matrix for `(δX_in, δP_in)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConvention {
    pub kind: ConventionKind,
    pub matrix: Matrix2<Complex64>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl NoiseConvention {
    pub fn vacuum() -> Self {
        Self {
            kind: ConventionKind::Vacuum,
            matrix: Matrix2::new(c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)),
        }
    }

    pub fn normal_ordered() -> Self {
        Self {
            kind: ConventionKind::NormalOrdered,
            matrix: Matrix2::new(c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)),
        }
    }

    pub fn symmetric() -> Self {
        Self { kind: ConventionKind::Symmetric, matrix: Matrix2::identity() }
    }

    /// An arbitrary Hermitian positive-semidefinite correlation matrix.
    pub fn custom(matrix: Matrix2<Complex64>) -> Result<Self> {
        let herm = (matrix - matrix.adjoint()).iter().all(|z| z.norm() <= 1e-12 * (1.0 + matrix.norm()));
        let a = matrix[(0, 0)].re;
        let d = matrix[(1, 1)].re;
        let det = a * d - matrix[(0, 1)].norm_sqr();
        let tol = 1e-12 * (a.abs() + d.abs()).max(1e-300);
        if !herm || a < -tol || d < -tol || det < -tol * (a.abs() + d.abs()) {
            return Err(Error::invalid("noise_convention", "matrix must be Hermitian positive semidefinite"));
        }
        Ok(Self { kind: ConventionKind::Custom, matrix })
    }

    pub fn zero() -> Self {
        Self { kind: ConventionKind::Custom, matrix: Matrix2::zeros() }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "vacuum" | "printed-vacuum" => Ok(Self::vacuum()),
            "normal-ordered" => Ok(Self::normal_ordered()),
            "symmetric" | "symmetric-classical" => Ok(Self::symmetric()),
            other => Err(Error::invalid(
                "noise_convention",
                format!("unknown convention `{other}` (expected vacuum, normal-ordered or symmetric)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ConventionKind::Vacuum => "vacuum",
            ConventionKind::NormalOrdered => "normal-ordered",
            ConventionKind::Symmetric => "symmetric",
            ConventionKind::Custom => "custom",
        }
    }

    /// Symmetrized real part, the covariance a classical SDE can realize.
    pub fn real_part(&self) -> Matrix2<f64> {
        let m = self.matrix.map(|z| z.re);
        (m + m.transpose()) * 0.5
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint {
    /// Angular frequency (rad/s).
    pub omega: f64,
    pub s_xm: f64,
    pub s_xc: f64,
    pub s_pc: f64,
    /// `d[ω]`.
    pub d: Complex64,
}

/// `d[ω] = (ω² − ω_M²)[(κ − iω)² + Δ̃²] + 2ω_M Δ̃ (2g c_s)²`.
pub fn denominator(p: &OptomechParams, c_s: f64, delta_tilde: f64, omega: f64) -> Complex64 {
    let a = c(p.kappa, -omega);
    let gc2 = (2.0 * p.g * c_s).powi(2);
    (a * a + delta_tilde * delta_tilde) * (omega * omega - p.omega_m * p.omega_m)
        + 2.0 * p.omega_m * delta_tilde * gc2
}

/// `G(ω) = (−iω − J)⁻¹`, or `None` when the system is singular at `ω`.
pub fn transfer_matrix(j: &DriftMatrix, omega: f64) -> Option<Matrix4<Complex64>> {
    let k = j.kappa;
    let a: Matrix4<Complex64> =
        Matrix4::identity() * c(0.0, -omega / k) - j.normalized().map(|x| c(x, 0.0));
    let inv = a.try_inverse()?;
    let norm1 = |m: &Matrix4<Complex64>| {
        (0..4).map(|col| m.column(col).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    };
    let rcond = 1.0 / (norm1(&a) * norm1(&inv));
    if !(rcond > SINGULAR_RCOND) {
        return None;
    }
    Some(inv / c(k, 0.0))
}

/// Full 4×4 spectral matrix `G Ξ G^H` at `ω`.
pub fn spectral_matrix(j: &DriftMatrix, omega: f64, conv: &NoiseConvention) -> Result<Matrix4<Complex64>> {
    let g = transfer_matrix(j, omega).ok_or(Error::SingularTransfer { omega })?;
    let mut xi = Matrix4::<Complex64>::zeros();
    let w = 2.0 * j.kappa;
    for r in 0..2 {
        for col in 0..2 {
            xi[(2 + r, 2 + col)] = conv.matrix[(r, col)] * w;
        }
    }
    Ok(g * xi * g.adjoint())
}

/// Transfer-matrix spectra for a steady state. Unstable states are rejected;
/// marginal ones are accepted but fail at their undamped resonances.
pub fn transfer_spectrum(
    p: &OptomechParams,
    s: &SteadyStateBranch,
    omegas: &[f64],
    conv: &NoiseConvention,
) -> Result<Vec<SpectrumPoint>> {
    let j = stability::drift_matrix(p, s);
    let verdict = stability::verdict_from(&j)?;
    if verdict.class == StabilityClass::Unstable {
        return Err(Error::UnstableState { margin: verdict.margin });
    }
    omegas
        .iter()
        .map(|&omega| {
            if !omega.is_finite() {
                return Err(Error::NonFinite("omega"));
            }
            let m = spectral_matrix(&j, omega, conv)?;
            Ok(SpectrumPoint {
                omega,
                s_xm: m[(0, 0)].re,
                s_xc: m[(2, 2)].re,
                s_pc: m[(3, 3)].re,
                d: denominator(p, s.c_s, s.delta_tilde, omega),
            })
        })
        .collect()
}

fn closed_form(
    p: &OptomechParams,
    s: &SteadyStateBranch,
    omegas: &[f64],
    corrected: bool,
) -> Result<Vec<SpectrumPoint>> {
    if ![p.kappa, p.g, p.omega_m, s.c_s, s.delta_tilde].iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("spectrum inputs"));
    }
    let (k, dt, gc) = (p.kappa, s.delta_tilde, p.g * s.c_s);
    omegas
        .iter()
        .map(|&w| {
            if !w.is_finite() {
                return Err(Error::NonFinite("omega"));
            }
            let d = denominator(p, s.c_s, dt, w);
            let d2 = d.norm_sqr();
            let lor = k * k + (dt + w).powi(2);
            let s_xm = 2.0 * k * (4.0 * gc * p.omega_m).powi(2) * lor / d2;
            let optical = if corrected {
                let a = c(k, -w);
                (a * a + dt * dt).norm_sqr()
            } else {
                d2
            };
            let drive = 2.0 * k * lor;
            Ok(SpectrumPoint {
                omega: w,
                s_xm,
                s_xc: ((2.0 * gc).powi(2) * dt * dt * s_xm + drive) / optical,
                s_pc: ((2.0 * gc).powi(2) * (k * k + w * w) * s_xm + drive) / optical,
                d,
            })
        })
        .collect()
}

/// Closed-form spectra with `|d[ω]|²` as the denominator of every quadrature.
pub fn closed_form_spectrum(p: &OptomechParams, s: &SteadyStateBranch, omegas: &[f64]) -> Result<Vec<SpectrumPoint>> {
    closed_form(p, s, omegas, false)
}

/// Closed-form spectra with the optical denominators replaced by
/// `|(κ − iω)² + Δ̃²|²`.
pub fn corrected_spectrum(p: &OptomechParams, s: &SteadyStateBranch, omegas: &[f64]) -> Result<Vec<SpectrumPoint>> {
    closed_form(p, s, omegas, true)
}

/// Evenly spaced grid including both ends.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![from],
        _ => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effmodel::{build_effective_model, tests::p1};
    use crate::steady::steady_states;
    use proptest::prelude::*;

    fn branch(c_s: f64, delta_tilde: f64) -> SteadyStateBranch {
        SteadyStateBranch {
            n: c_s * c_s,
            c_s,
            x_m: 0.0,
            p_m: 0.0,
            delta_tilde,
            residual: 0.0,
            fold: false,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(a.abs())
    }

    #[test]
    fn uncoupled_optical_lorentzian() {
        // 2×2 inversion: the vacuum convention feeds the −Δ̃ eigenmode only,
        // normal ordering the +Δ̃ one at half weight, the symmetric one both
        let p = OptomechParams::new(0.7, 0.0, 1.3);
        let s = branch(2.0, 0.9);
        let lor = |w: f64, d: f64| 2.0 * 1.3 / (1.3f64.powi(2) + (w - d).powi(2));
        let grid: Vec<f64> = linspace(-5.0, 5.0, 1000).into_iter().filter(|w| (w.abs() - 0.7).abs() > 1e-3).collect();
        let cases: [(NoiseConvention, &dyn Fn(f64) -> f64); 3] = [
            (NoiseConvention::vacuum(), &|w| lor(w, 0.9)),
            (NoiseConvention::normal_ordered(), &|w| 0.5 * lor(w, -0.9)),
            (NoiseConvention::symmetric(), &|w| 0.5 * (lor(w, 0.9) + lor(w, -0.9))),
        ];
        for (conv, expected) in cases {
            for pt in transfer_spectrum(&p, &s, &grid, &conv).unwrap() {
                let e = expected(pt.omega);
                assert!(rel(pt.s_xc, e) < 1e-12, "{}: {} vs {}", conv.name(), pt.s_xc, e);
                assert!(rel(pt.s_pc, e) < 1e-12);
                assert_eq!(pt.s_xm, 0.0);
            }
        }
    }

    #[test]
    fn uncorrected_optical_spectra_miss_the_lorentzian() {
        let p = OptomechParams::new(0.7, 0.0, 1.3);
        let s = branch(2.0, 0.9);
        let w = [0.1, 2.0];
        let raw = closed_form_spectrum(&p, &s, &w).unwrap();
        let corrected = corrected_spectrum(&p, &s, &w).unwrap();
        for (a, b) in raw.iter().zip(&corrected) {
            let lor = 2.0 * 1.3 / (1.3f64.powi(2) + (a.omega - 0.9).powi(2));
            assert!(rel(b.s_xc, lor) < 1e-13);
            assert!(rel(a.s_xc, lor) > 1e-2);
            // the spurious factor is exactly (ω² − ω_M²)²
            assert!(rel(a.s_xc * (a.omega.powi(2) - 0.49).powi(2), lor) < 1e-12);
        }
    }

    #[test]
    fn zero_frequency_denominator() {
        let p = OptomechParams::new(0.6, 0.05, 1.0);
        let s = branch(1.2, 0.8);
        let d0 = denominator(&p, 1.2, 0.8, 0.0);
        let expected = -0.36 * (1.0 + 0.64) + 2.0 * 0.6 * 0.8 * (2.0 * 0.05 * 1.2f64).powi(2);
        assert!((d0.re - expected).abs() < 1e-15 && d0.im == 0.0);
        let pts = closed_form_spectrum(&p, &s, &[0.0]).unwrap();
        assert!(pts[0].s_xm.is_finite() && pts[0].s_xc.is_finite() && pts[0].s_pc.is_finite());
    }

    #[test]
    fn unstable_and_singular_rejected() {
        let m = build_effective_model(&p1()).unwrap();
        let p = m.optomech();
        let k = p.kappa;
        let s = steady_states(&p, 5.0 * k, 2.5 * k).unwrap();
        assert_eq!(s.len(), 3);
        assert!(matches!(
            transfer_spectrum(&p, &s[1], &[0.0], &NoiseConvention::vacuum()),
            Err(Error::UnstableState { .. })
        ));
        let q = OptomechParams::new(0.7, 0.0, 1.0);
        assert_eq!(
            transfer_spectrum(&q, &branch(1.0, 0.5), &[0.7], &NoiseConvention::vacuum()),
            Err(Error::SingularTransfer { omega: 0.7 })
        );
    }

    #[test]
    fn custom_convention_validation() {
        assert!(NoiseConvention::custom(Matrix2::new(c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(1.0, 0.0))).is_err());
        assert!(NoiseConvention::custom(NoiseConvention::vacuum().matrix).is_ok());
        assert!(NoiseConvention::by_name("thermal").is_err());
    }

    #[test]
    fn mechanical_peaks_sit_at_eigenfrequencies() {
        // weak coupling: g c_s ≤ 0.1 κ
        let p = OptomechParams::new(2.0, 0.05, 1.0);
        let s = branch(1.5, 1.0);
        let j = stability::drift_matrix(&p, &s);
        let v = stability::verdict_from(&j).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        let grid = linspace(-4.0, 4.0, 8001);
        let h = grid[1] - grid[0];
        let pts = transfer_spectrum(&p, &s, &grid, &NoiseConvention::vacuum()).unwrap();
        let maxima: Vec<f64> = pts
            .windows(3)
            .filter(|w| w[1].s_xm > w[0].s_xm && w[1].s_xm > w[2].s_xm)
            .map(|w| w[1].omega)
            .collect();
        assert!(!maxima.is_empty());
        let mech: Vec<f64> = v.frequencies.iter().copied().filter(|f| (f.abs() - 2.0).abs() < 0.5).collect();
        for w in &maxima {
            assert!(mech.iter().any(|f| (f - w).abs() <= h), "peak {w} vs {mech:?}");
        }
    }

    #[test]
    fn denominator_conjugate_symmetry() {
        let p = OptomechParams::new(0.6, 0.3, 1.0);
        for w in linspace(-3.0, 3.0, 31) {
            let a = denominator(&p, 1.1, 0.4, w);
            let b = denominator(&p, 1.1, 0.4, -w);
            assert!(((a * b).re - a.norm_sqr()).abs() <= 1e-12 * a.norm_sqr());
            assert!((a * b).im.abs() <= 1e-12 * a.norm_sqr());
        }
    }

    fn random_stable(wm: f64, g: f64, c_s: f64, dt: f64) -> Option<(OptomechParams, SteadyStateBranch)> {
        let p = OptomechParams::new(wm, g, 1.0);
        let s = branch(c_s, dt);
        let v = stability::classify(&p, &s);
        (v.class == StabilityClass::Stable).then_some((p, s))
    }

    proptest! {
        #[test]
        fn transfer_matches_closed_form_mechanical(
            wm in 0.05f64..5.0, g in 0.01f64..1.0, c_s in 0.1f64..5.0, dt in 0.05f64..5.0,
        ) {
            if let Some((p, s)) = random_stable(wm, g, c_s, dt) {
                let grid = linspace(-4.0 * (wm + dt), 4.0 * (wm + dt), 101);
                let a = transfer_spectrum(&p, &s, &grid, &NoiseConvention::vacuum()).unwrap();
                let b = closed_form_spectrum(&p, &s, &grid).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!(rel(x.s_xm, y.s_xm) <= 1e-10, "{} vs {}", x.s_xm, y.s_xm);
                }
            }
        }

        #[test]
        fn densities_nonnegative(
            wm in 0.05f64..5.0, g in 0.01f64..1.0, c_s in 0.1f64..5.0, dt in 0.05f64..5.0, w in -20.0f64..20.0,
        ) {
            if let Some((p, s)) = random_stable(wm, g, c_s, dt) {
                for conv in [NoiseConvention::vacuum(), NoiseConvention::normal_ordered(), NoiseConvention::symmetric()] {
                    let m = spectral_matrix(&stability::drift_matrix(&p, &s), w, &conv).unwrap();
                    for i in 0..4 {
                        prop_assert!(m[(i, i)].re >= -1e-14 * m.norm());
                    }
                }
            }
        }

        #[test]
        fn parity_of_response(
            wm in 0.05f64..5.0, g in 0.01f64..1.0, c_s in 0.1f64..5.0, dt in 0.05f64..5.0, w in -10.0f64..10.0,
        ) {
            // (Δ̃, ω, ω_M) → (−Δ̃, −ω, −ω_M) is a similarity of the linear
            // response, so every quadrature density is unchanged
            if let Some((p, s)) = random_stable(wm, g, c_s, dt) {
                let q = OptomechParams::new(-wm, g, 1.0);
                let t = branch(c_s, -dt);
                for conv in [NoiseConvention::vacuum(), NoiseConvention::normal_ordered(), NoiseConvention::symmetric()] {
                    let a = transfer_spectrum(&p, &s, &[w], &conv).unwrap()[0];
                    let b = transfer_spectrum(&q, &t, &[-w], &conv).unwrap()[0];
                    prop_assert!(rel(a.s_xm, b.s_xm) <= 1e-9);
                    prop_assert!(rel(a.s_xc, b.s_xc) <= 1e-9);
                    prop_assert!(rel(a.s_pc, b.s_pc) <= 1e-9);
                }
            }
        }
    }
}
