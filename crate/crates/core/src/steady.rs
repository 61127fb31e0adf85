//! Mean-field steady states of the driven cavity with a fermionic mirror.
//!
//! Setting the time derivatives of the mean-field equations to zero gives
//! `P_M = 0`, `X_M = −2√2 g n / ω_M` and the photon-number cubic
//!
//! ```text
//! χ² n³ − 2χΔ n² + (κ² + Δ²) n − η² = 0,   χ = 4g²/ω_M
//! ```
//!
//! Everything here is solved in units of `κ`. Writing `y = χ n / κ` turns the
//! cubic into `y³ − 2Δ' y² + (1 + Δ'²) y − χ' η'² = 0`, which stays well scaled
//! across the parameter range; roots are then polished on the `n` cubic.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubic;
use crate::effmodel::OptomechParams;
use crate::error::{Error, Result};
use crate::stability::{self, StabilityClass, StabilityVerdict};

/// Relative root separation below which two roots are merged into a fold.
pub const FOLD_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateBranch {
    /// Intracavity photon number `|c_s|²`.
    pub n: f64,
    /// Field amplitude after rotating `c_s` onto the positive real axis.
    pub c_s: f64,
    pub x_m: f64,
    pub p_m: f64,
    /// `Δ̃ = Δ − 4g² n / ω_M` (rad/s).
    pub delta_tilde: f64,
    /// Relative residual of the photon-number cubic.
    pub residual: f64,
    /// Set when this root is a merged double root.
    pub fold: bool,
}

fn check_inputs(p: &OptomechParams, eta: f64, delta: f64) -> Result<()> {
    if !(p.kappa.is_finite() && p.kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be finite and > 0"));
    }
    if !(p.omega_m.is_finite() && p.omega_m != 0.0) {
        return Err(Error::invalid("omega_m", "must be finite and nonzero"));
    }
    if !p.g.is_finite() {
        return Err(Error::NonFinite("g"));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::invalid("eta", "must be finite and >= 0"));
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite("delta"));
    }
    Ok(())
}

/// Coefficients `[c0, c1, c2, c3]` of the κ-normalized photon-number cubic.
pub fn photon_cubic(chi_k: f64, delta_k: f64, eta_k: f64) -> [f64; 4] {
    [-eta_k * eta_k, 1.0 + delta_k * delta_k, -2.0 * chi_k * delta_k, chi_k * chi_k]
}

/// Relative residual of `n` on the normalized cubic: `|f(n)| / η'²`, falling
/// back to the term scale when undriven.
pub fn relative_residual(chi_k: f64, delta_k: f64, eta_k: f64, n: f64) -> f64 {
    let c = photon_cubic(chi_k, delta_k, eta_k);
    let (f, _) = cubic::eval(&c, n);
    let scale = if eta_k > 0.0 { eta_k * eta_k } else { cubic::term_scale(&c, n) };
    if scale == 0.0 {
        f.abs()
    } else {
        f.abs() / scale
    }
}

fn make_branch(p: &OptomechParams, delta: f64, eta: f64, n: f64, fold: bool) -> SteadyStateBranch {
    let k = p.kappa;
    let chi = p.chi();
    SteadyStateBranch {
        n,
        c_s: n.sqrt(),
        x_m: -2.0 * SQRT_2 * p.g * n / p.omega_m,
        p_m: 0.0,
        delta_tilde: delta - chi * n,
        residual: relative_residual(chi / k, delta / k, eta / k, n),
        fold,
    }
}

/// All physical (real, nonnegative) steady states for drive `eta` and
/// effective detuning `delta`, sorted by photon number.
pub fn steady_states(p: &OptomechParams, eta: f64, delta: f64) -> Result<Vec<SteadyStateBranch>> {
    check_inputs(p, eta, delta)?;
    let k = p.kappa;
    let chi_k = p.chi() / k;
    let delta_k = delta / k;
    let eta_k = eta / k;

    if eta == 0.0 {
        return Ok(vec![make_branch(p, delta, eta, 0.0, false)]);
    }
    if chi_k == 0.0 {
        let n = eta_k * eta_k / (1.0 + delta_k * delta_k);
        return Ok(vec![make_branch(p, delta, eta, n, false)]);
    }

    let shifted = [-chi_k * eta_k * eta_k, 1.0 + delta_k * delta_k, -2.0 * delta_k, 1.0];
    let ncubic = photon_cubic(chi_k, delta_k, eta_k);
    let mut ns: Vec<f64> = cubic::real_roots(&shifted)
        .into_iter()
        .map(|y| y / chi_k)
        .filter(|&n| n >= 0.0)
        .map(|n| cubic::polish(&ncubic, n))
        .collect();
    ns.sort_by(|a, b| a.total_cmp(b));

    let mut out: Vec<SteadyStateBranch> = Vec::with_capacity(3);
    for n in ns {
        if let Some(last) = out.last_mut() {
            if (n - last.n).abs() <= FOLD_TOLERANCE * n.abs().max(last.n.abs()) {
                let merged = cubic::polish(&ncubic, 0.5 * (n + last.n));
                *last = make_branch(p, delta, eta, merged, true);
                continue;
            }
        }
        out.push(make_branch(p, delta, eta, n, false));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Effective detuning `Δ` at fixed drive.
    Detuning,
    /// Drive `η` at fixed detuning.
    Drive,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Detuning => "detuning",
            SweepVariable::Drive => "drive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub branch: SteadyStateBranch,
    pub verdict: StabilityVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Value of the swept variable (rad/s).
    pub value: f64,
    pub branches: Vec<BranchSample>,
}

impl CurvePoint {
    fn stable_indices(&self) -> Vec<usize> {
        self.branches
            .iter()
            .enumerate()
            .filter(|(_, b)| b.verdict.class != StabilityClass::Unstable)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BistabilityCurve {
    pub variable: SweepVariable,
    /// The value held fixed: `η` for detuning sweeps, `Δ` for drive sweeps.
    pub fixed: f64,
    pub points: Vec<CurvePoint>,
}

/// Sample every steady state (with stability verdicts) on `steps` evenly
/// spaced values of `variable` in `[from, to]`.
pub fn sweep(
    p: &OptomechParams,
    variable: SweepVariable,
    from: f64,
    to: f64,
    steps: usize,
    fixed: f64,
) -> Result<BistabilityCurve> {
    if steps < 2 {
        return Err(Error::invalid("steps", "need at least 2 samples"));
    }
    if !(from.is_finite() && to.is_finite()) || from == to {
        return Err(Error::invalid("range", format!("empty sweep range [{from}, {to}]")));
    }
    let h = (to - from) / (steps - 1) as f64;
    let points = (0..steps)
        .into_par_iter()
        .map(|i| {
            let value = if i == steps - 1 { to } else { from + h * i as f64 };
            let (eta, delta) = match variable {
                SweepVariable::Drive => (value, fixed),
                SweepVariable::Detuning => (fixed, value),
            };
            let branches = steady_states(p, eta, delta)?
                .into_iter()
                .map(|branch| {
                    let verdict = stability::classify(p, &branch);
                    BranchSample { branch, verdict }
                })
                .collect();
            Ok(CurvePoint { value, branches })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BistabilityCurve { variable, fixed, points })
}

/// Cusp of the bistable region in the (Δ, η) plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub eta_c: f64,
    pub delta_c: f64,
    pub n_c: f64,
    /// Same threshold located by the discriminant scan.
    pub scan_eta_c: f64,
    pub scan_delta_c: f64,
}

impl Threshold {
    pub fn scan_discrepancy(&self) -> f64 {
        (self.eta_c - self.scan_eta_c).abs() / self.eta_c
    }
}

/// Closed-form cusp, verified against [`scan_threshold`]. Fails if the two
/// disagree by more than `1e-4` relative in `η_c`.
pub fn bistability_threshold(p: &OptomechParams) -> Result<Threshold> {
    check_inputs(p, 0.0, 0.0)?;
    let chi = p.chi();
    if chi == 0.0 {
        return Err(Error::NeverBistable);
    }
    let k = p.kappa;
    let sqrt3 = 3f64.sqrt();
    let delta_c = sqrt3 * k * chi.signum();
    let n_c = 2.0 * k / (sqrt3 * chi.abs());
    let eta_c = (8.0 * k * k * k / (3.0 * sqrt3 * chi.abs())).sqrt();
    let (scan_eta_c, scan_delta_c) = scan_threshold(p)?;
    let t = Threshold { eta_c, delta_c, n_c, scan_eta_c, scan_delta_c };
    if t.scan_discrepancy() > 1e-4 {
        return Err(Error::Verification(format!(
            "cusp formula η_c = {eta_c:e} vs scan {scan_eta_c:e}"
        )));
    }
    Ok(t)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if (hi - lo) <= 1e-13 * hi.abs().max(1e-300) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Locate the bistability threshold numerically: scan `Δ` for sign changes of
/// `max_η disc(η, Δ)`, bisect each, and report the smallest `η` at which the
/// cubic discriminant turns positive. Returns `(η_c, Δ_c)` in rad/s.
pub fn scan_threshold(p: &OptomechParams) -> Result<(f64, f64)> {
    let k = p.kappa;
    let chi_k = p.chi() / k;
    if chi_k == 0.0 {
        return Err(Error::NeverBistable);
    }
    // argmax over η'² of the discriminant at fixed Δ'
    let best = |d: f64| -> (f64, f64) {
        let s_hi = 8.0 * (1.0 + d * d).powf(1.5) / chi_k.abs();
        let disc = |s: f64| cubic::discriminant(&photon_cubic(chi_k, d, s.sqrt()));
        let s = golden_max(disc, 0.0, s_hi);
        (disc(s), s.sqrt())
    };

    const SPAN: f64 = 30.0;
    const N: usize = 1201;
    let grid: Vec<f64> = (0..N).map(|i| -SPAN + 2.0 * SPAN * i as f64 / (N - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| best(d).0).collect();

    let mut found: Option<(f64, f64)> = None;
    for i in 0..N - 1 {
        if (vals[i] > 0.0) == (vals[i + 1] > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (grid[i], grid[i + 1]);
        let lo_pos = vals[i] > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (best(mid).0 > 0.0) == lo_pos {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let edge = if lo_pos { lo } else { hi };
        let eta = best(edge).1;
        if found.is_none_or(|(e, _)| eta < e) {
            found = Some((eta, edge));
        }
    }
    match found {
        Some((eta, d)) => Ok((eta * k, d * k)),
        None => Err(Error::Verification("discriminant scan found no bistable region".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub value: f64,
    /// Index into the curve point's branch list, `None` inside a gap.
    pub branch_index: Option<usize>,
    pub n: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// Last sample on the branch that disappeared.
    pub from_value: f64,
    /// First sample after it disappeared.
    pub to_value: f64,
    pub n_from: f64,
    /// `None` when no stable branch remains.
    pub n_to: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisTrace {
    pub direction: Direction,
    /// Samples in traversal order.
    pub samples: Vec<TraceSample>,
    pub jumps: Vec<Jump>,
    /// Sweep values with no stable (or marginal) branch.
    pub gaps: Vec<f64>,
}

fn nearest(branches: &[BranchSample], candidates: &[usize], n: f64) -> Option<usize> {
    candidates
        .iter()
        .copied()
        .min_by(|&a, &b| (branches[a].branch.n - n).abs().total_cmp(&(branches[b].branch.n - n).abs()))
}

/// Follow the stable branch the system sits on while sweeping in `direction`,
/// jumping to the surviving stable branch when the current one folds away.
pub fn hysteresis_trace(curve: &BistabilityCurve, direction: Direction) -> HysteresisTrace {
    let order: Vec<usize> = match direction {
        Direction::Up => (0..curve.points.len()).collect(),
        Direction::Down => (0..curve.points.len()).rev().collect(),
    };
    let mut samples = Vec::with_capacity(order.len());
    let mut jumps = Vec::new();
    let mut gaps = Vec::new();
    // (point index, branch index) currently followed
    let mut current: Option<(usize, usize)> = None;

    for &pi in &order {
        let pt = &curve.points[pi];
        let stable = pt.stable_indices();
        let chosen = match current {
            None => match direction {
                Direction::Up => stable.first().copied(),
                Direction::Down => stable.last().copied(),
            },
            Some((prev_pi, prev_bi)) => {
                let prev = &curve.points[prev_pi];
                let n_prev = prev.branches[prev_bi].branch.n;
                let cand = nearest(&pt.branches, &stable, n_prev);
                if let Some(ci) = cand {
                    // the followed branch continues only if it is also the
                    // closest predecessor of the candidate
                    let all_prev: Vec<usize> = (0..prev.branches.len()).collect();
                    let back = nearest(&prev.branches, &all_prev, pt.branches[ci].branch.n);
                    if back != Some(prev_bi) {
                        jumps.push(Jump {
                            from_value: prev.value,
                            to_value: pt.value,
                            n_from: n_prev,
                            n_to: Some(pt.branches[ci].branch.n),
                        });
                    }
                } else {
                    jumps.push(Jump {
                        from_value: prev.value,
                        to_value: pt.value,
                        n_from: n_prev,
                        n_to: None,
                    });
                }
                cand
            }
        };
        match chosen {
            Some(bi) => {
                samples.push(TraceSample {
                    value: pt.value,
                    branch_index: Some(bi),
                    n: Some(pt.branches[bi].branch.n),
                });
                current = Some((pi, bi));
            }
            None => {
                samples.push(TraceSample { value: pt.value, branch_index: None, n: None });
                gaps.push(pt.value);
                current = None;
            }
        }
    }
    HysteresisTrace { direction, samples, jumps, gaps }
}
