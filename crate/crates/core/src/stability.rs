//! Linear stability of steady states.
//!
//! Fluctuations `f = [δX_M, δP_M, δX, δP]` obey `ḟ = J f + ξ` with
//!
//! ```text
//!     ⎡  0     ω_M     0     0 ⎤
//! J = ⎢ −ω_M    0   −4g c_s  0 ⎥
//!     ⎢  0      0     −κ     Δ̃ ⎥
//!     ⎣ −2g c_s 0     −Δ̃    −κ ⎦
//! ```
//!
//! The factor-two asymmetry between the two coupling entries is real: the
//! mechanical quadratures are sums over the left- and right-moving modes.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::effmodel::OptomechParams;
use crate::error::{Error, Result};
use crate::steady::SteadyStateBranch;

/// Stable/marginal boundary on `max Re λ`, in units of `κ`.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftMatrix {
    pub matrix: Matrix4<f64>,
    pub c_s: f64,
    pub delta_tilde: f64,
    pub omega_m: f64,
    pub g: f64,
    pub kappa: f64,
}

impl DriftMatrix {
    pub fn new(p: &OptomechParams, c_s: f64, delta_tilde: f64) -> Self {
        let (wm, k, gc) = (p.omega_m, p.kappa, p.g * c_s);
        #[rustfmt::skip]
        let matrix = Matrix4::new(
            0.0,       wm,  0.0,       0.0,
            -wm,       0.0, -4.0 * gc, 0.0,
            0.0,       0.0, -k,        delta_tilde,
            -2.0 * gc, 0.0, -delta_tilde, -k,
        );
        Self { matrix, c_s, delta_tilde, omega_m: wm, g: p.g, kappa: k }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// The matrix divided by `κ`.
    pub fn normalized(&self) -> Matrix4<f64> {
        self.matrix / self.kappa
    }
}

pub fn drift_matrix(p: &OptomechParams, s: &SteadyStateBranch) -> DriftMatrix {
    DriftMatrix::new(p, s.c_s, s.delta_tilde)
}

/// Coefficients of `det(λI − A) = λ⁴ + c[3]λ³ + c[2]λ² + c[1]λ + c[0]`
/// (Faddeev–LeVerrier).
fn char_poly(a: &Matrix4<f64>) -> [f64; 4] {
    let mut c = [0.0; 4];
    let mut m = Matrix4::<f64>::zeros();
    let id = Matrix4::<f64>::identity();
    let mut coeff = 1.0;
    for k in 1..=4usize {
        m = a * m + id * coeff;
        coeff = -(a * m).trace() / k as f64;
        c[4 - k] = coeff;
    }
    c
}

fn eval_poly(c: &[f64; 4], z: Complex64) -> (Complex64, Complex64) {
    let p = (((z + c[3]) * z + c[2]) * z + c[1]) * z + c[0];
    let dp = ((z * 4.0 + 3.0 * c[3]) * z + 2.0 * c[2]) * z + c[1];
    (p, dp)
}

/// `|det(A − λI)|` computed by LU on the complex matrix.
pub fn char_residual(a: &Matrix4<f64>, lambda: Complex64) -> f64 {
    let m: Matrix4<Complex64> = a.map(|x| Complex64::new(x, 0.0)) - Matrix4::identity() * lambda;
    m.lu().determinant().norm()
}

/// Eigenvalues of `J` in rad/s, sorted by real part, largest first.
pub fn eigenvalues(j: &DriftMatrix) -> Result<[Complex64; 4]> {
    if j.matrix.iter().any(|x| !x.is_finite()) || !(j.kappa > 0.0) {
        return Err(Error::NonFinite("drift matrix"));
    }
    let a = j.normalized();
    let raw = a.complex_eigenvalues();
    let poly = char_poly(&a);
    let mut ev = [Complex64::new(0.0, 0.0); 4];
    for (slot, &z0) in ev.iter_mut().zip(raw.iter()) {
        let mut z = z0;
        let mut r = char_residual(&a, z);
        for _ in 0..3 {
            let (p, dp) = eval_poly(&poly, z);
            if dp.norm() == 0.0 {
                break;
            }
            let next = z - p / dp;
            let rn = char_residual(&a, next);
            if rn < r {
                z = next;
                r = rn;
            } else {
                break;
            }
        }
        *slot = z;
    }
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    for z in ev.iter_mut() {
        *z *= j.kappa;
    }
    Ok(ev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityClass {
    Stable,
    Unstable,
    Marginal,
}

impl StabilityClass {
    /// Single-letter code used in CSV output.
    pub fn code(&self) -> &'static str {
        match self {
            StabilityClass::Stable => "S",
            StabilityClass::Unstable => "U",
            StabilityClass::Marginal => "M",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    /// `[re, im]` pairs in rad/s, sorted by real part descending.
    pub eigenvalues: [[f64; 2]; 4],
    pub class: StabilityClass,
    /// Imaginary parts of the eigenvalues (rad/s).
    pub frequencies: [f64; 4],
    /// Largest real part (rad/s).
    pub margin: f64,
}

impl StabilityVerdict {
    pub fn complex(&self) -> [Complex64; 4] {
        self.eigenvalues.map(|[re, im]| Complex64::new(re, im))
    }
}

pub fn verdict_from(j: &DriftMatrix) -> Result<StabilityVerdict> {
    let ev = eigenvalues(j)?;
    let margin = ev[0].re;
    let tol = MARGIN_TOLERANCE * j.kappa;
    let class = if margin < -tol {
        StabilityClass::Stable
    } else if margin.abs() <= tol {
        StabilityClass::Marginal
    } else {
        StabilityClass::Unstable
    };
    Ok(StabilityVerdict {
        eigenvalues: ev.map(|z| [z.re, z.im]),
        class,
        frequencies: ev.map(|z| z.im),
        margin,
    })
}

/// Classify a steady state. Inputs built by [`crate::steady`] are always
/// finite, so this cannot fail.
pub fn classify(p: &OptomechParams, s: &SteadyStateBranch) -> StabilityVerdict {
    verdict_from(&drift_matrix(p, s)).expect("steady states are finite")
}

pub fn eigenvalue_sum(ev: &[Complex64; 4]) -> Complex64 {
    ev.iter().copied().sum()
}
