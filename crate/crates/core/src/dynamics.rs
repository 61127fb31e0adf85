//! Time-domain integration and spectral estimation.
//!
//! Mean-field equations, noise dropped, with a real drive `η`:
//!
//! ```text
//! Ẋ_M = ω_M P_M
//! Ṗ_M = −ω_M X_M − 2√2 g |c|²
//! ċ   = −i(Δ + √2 g X_M) c − κ c + η
//! ```
//!
//! The linearized run integrates `df = J f dt + dW` by Euler–Maruyama, with
//! Gaussian increments on the optical quadratures only.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::effmodel::OptomechParams;
use crate::error::{Error, Result};
use crate::spectra::NoiseConvention;
use crate::stability::{self, StabilityClass};
use crate::steady::SteadyStateBranch;

/// Upper bound on `dt · max(ω_M, κ, |Δ|)`.
pub const STEP_LIMIT: f64 = 0.1;
/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE: f64 = 1e12;
/// Generator identity persisted with runs.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.3), seed_from_u64(seed), stream = member index";

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub steps: usize,
    pub ensemble: usize,
    pub seed: u64,
    /// Leading fraction of the steps discarded before recording.
    pub burn_in: f64,
    pub convention: NoiseConvention,
    /// `[X_M, P_M, X, P]` for linear runs, `[X_M, P_M, Re c, Im c]` for
    /// mean-field runs.
    pub initial: [f64; 4],
    /// Record every `record_stride`-th state.
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            ensemble: 1,
            seed: 0,
            burn_in: 0.0,
            convention: NoiseConvention::symmetric(),
            initial: [0.0; 4],
            record_stride: 1,
        }
    }

    fn validate(&self, rates: &[f64]) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        if self.ensemble == 0 {
            return Err(Error::invalid("ensemble", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::invalid("burn_in", "must lie in [0, 1)"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        if self.initial.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        let fastest = rates.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        if !fastest.is_finite() {
            return Err(Error::NonFinite("rates"));
        }
        let product = self.dt * fastest;
        if product > STEP_LIMIT {
            return Err(Error::StepTooLarge { product, limit: STEP_LIMIT });
        }
        Ok(())
    }

    fn first_recorded(&self) -> usize {
        (self.burn_in * self.steps as f64).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    MeanField,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 4]>,
    pub seed: u64,
    pub member: usize,
}

impl Trajectory {
    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn sample_interval(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last(&self) -> Option<&[f64; 4]> {
        self.states.last()
    }
}

struct Recorder {
    first: usize,
    stride: usize,
    dt: f64,
    times: Vec<f64>,
    states: Vec<[f64; 4]>,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        let first = cfg.first_recorded();
        let cap = (cfg.steps - first).div_ceil(cfg.record_stride);
        Self {
            first,
            stride: cfg.record_stride,
            dt: cfg.dt,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
        }
    }

    /// `k` counts completed steps.
    #[inline]
    fn offer(&mut self, k: usize, y: &[f64; 4]) {
        if k >= self.first && (k - self.first).is_multiple_of(self.stride) {
            self.times.push(k as f64 * self.dt);
            self.states.push(*y);
        }
    }
}

fn check_state(step: usize, y: &[f64; 4]) -> Result<()> {
    let magnitude = y.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !magnitude.is_finite() || magnitude > DIVERGENCE {
        return Err(Error::Diverged { step, magnitude });
    }
    Ok(())
}

/// Right-hand side of the mean-field equations.
pub fn meanfield_rhs(p: &OptomechParams, eta: f64, delta: f64, y: &[f64; 4]) -> [f64; 4] {
    let [xm, pm, a, b] = *y;
    let n = a * a + b * b;
    let det = delta + SQRT_2 * p.g * xm;
    [
        p.omega_m * pm,
        -p.omega_m * xm - 2.0 * SQRT_2 * p.g * n,
        det * b - p.kappa * a + eta,
        -det * a - p.kappa * b,
    ]
}

/// Mean-field state `[X_M, P_M, Re c, Im c]` of a steady branch driven by a
/// real `η`.
pub fn meanfield_fixed_point(p: &OptomechParams, eta: f64, s: &SteadyStateBranch) -> [f64; 4] {
    let den = p.kappa * p.kappa + s.delta_tilde * s.delta_tilde;
    [s.x_m, s.p_m, eta * p.kappa / den, -eta * s.delta_tilde / den]
}

fn rk4_step(p: &OptomechParams, eta: f64, delta: f64, y: &[f64; 4], h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], k: &[f64; 4], s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]];
    let k1 = meanfield_rhs(p, eta, delta, y);
    let k2 = meanfield_rhs(p, eta, delta, &add(y, &k1, 0.5 * h));
    let k3 = meanfield_rhs(p, eta, delta, &add(y, &k2, 0.5 * h));
    let k4 = meanfield_rhs(p, eta, delta, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Fixed-step RK4 integration of the mean-field equations from
/// `cfg.initial`.
pub fn simulate_meanfield(p: &OptomechParams, eta: f64, delta: f64, cfg: &SimConfig) -> Result<Trajectory> {
    if !(eta.is_finite() && delta.is_finite() && p.g.is_finite() && p.omega_m.is_finite()) {
        return Err(Error::NonFinite("mean-field parameters"));
    }
    if !(p.kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }
    let [xm0, _, _, _] = cfg.initial;
    let initial_detuning = delta + SQRT_2 * p.g * xm0;
    cfg.validate(&[p.omega_m, p.kappa, delta, initial_detuning])?;

    let mut rec = Recorder::new(cfg);
    let mut y = cfg.initial;
    rec.offer(0, &y);
    for k in 1..cfg.steps {
        y = rk4_step(p, eta, delta, &y, cfg.dt);
        check_state(k, &y)?;
        rec.offer(k, &y);
    }
    Ok(Trajectory { kind: TrajectoryKind::MeanField, times: rec.times, states: rec.states, seed: cfg.seed, member: 0 })
}

/// Lower-triangular `L` with `L Lᵀ = m` for a 2×2 positive-semidefinite `m`.
fn cholesky2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let tol = 1e-12 * (m[0][0].abs() + m[1][1].abs());
    if m[0][0] < -tol || m[1][1] < -tol {
        return Err(Error::invalid("noise_convention", "real part is not positive semidefinite"));
    }
    let a = m[0][0].max(0.0).sqrt();
    let b = if a > 0.0 { m[1][0] / a } else { 0.0 };
    let rest = m[1][1] - b * b;
    if rest < -tol {
        return Err(Error::invalid("noise_convention", "real part is not positive semidefinite"));
    }
    Ok([[a, 0.0], [b, rest.max(0.0).sqrt()]])
}

/// Euler–Maruyama run of the linearized equations for one ensemble member.
/// The member index selects the generator stream, so members are independent
/// and each is reproducible on its own.
pub fn simulate_linear_member(
    p: &OptomechParams,
    s: &SteadyStateBranch,
    cfg: &SimConfig,
    member: usize,
) -> Result<Trajectory> {
    let drift = stability::drift_matrix(p, s);
    let verdict = stability::verdict_from(&drift)?;
    if verdict.class == StabilityClass::Unstable {
        return Err(Error::UnstableState { margin: verdict.margin });
    }
    cfg.validate(&[p.omega_m, p.kappa, s.delta_tilde])?;

    let re = cfg.convention.real_part();
    let w = 2.0 * p.kappa * cfg.dt;
    let chol = cholesky2([[w * re[(0, 0)], w * re[(0, 1)]], [w * re[(1, 0)], w * re[(1, 1)]]])?;
    let noisy = chol.iter().flatten().any(|&x| x != 0.0);

    let mut j = [[0.0; 4]; 4];
    for (r, row) in j.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = drift.matrix[(r, c)] * cfg.dt;
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(member as u64);
    let mut rec = Recorder::new(cfg);
    let mut y = cfg.initial;
    rec.offer(0, &y);
    for k in 1..cfg.steps {
        let mut next = y;
        for r in 0..4 {
            next[r] += j[r][0] * y[0] + j[r][1] * y[1] + j[r][2] * y[2] + j[r][3] * y[3];
        }
        if noisy {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            next[2] += chol[0][0] * z0;
            next[3] += chol[1][0] * z0 + chol[1][1] * z1;
        }
        y = next;
        if k % 1024 == 0 || k + 1 == cfg.steps {
            check_state(k, &y)?;
        }
        rec.offer(k, &y);
    }
    check_state(cfg.steps, &y)?;
    Ok(Trajectory { kind: TrajectoryKind::Linear, times: rec.times, states: rec.states, seed: cfg.seed, member })
}

/// Member 0 of [`simulate_linear_member`].
pub fn simulate_linear(p: &OptomechParams, s: &SteadyStateBranch, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_linear_member(p, s, cfg, 0)
}

/// All `cfg.ensemble` members, in index order.
pub fn simulate_ensemble(p: &OptomechParams, s: &SteadyStateBranch, cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    (0..cfg.ensemble).into_par_iter().map(|m| simulate_linear_member(p, s, cfg, m)).collect()
}

/// Two-sided power spectral density on an ascending angular-frequency axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        if self.omega.len() < 2 {
            0.0
        } else {
            self.omega[1] - self.omega[0]
        }
    }

    /// Index of the largest value with `lo ≤ ω ≤ hi`.
    pub fn peak_index(&self, lo: f64, hi: f64) -> Option<usize> {
        (0..self.omega.len())
            .filter(|&i| self.omega[i] >= lo && self.omega[i] <= hi)
            .max_by(|&a, &b| self.power[a].total_cmp(&self.power[b]))
    }
}

/// Welch estimate with a Hann window and 50% overlap. `segments`
/// overlapping segments of length `2N/(segments + 1)` tile the series.
/// Scaled so that white noise of density `σ²` (sample variance `σ²/dt`)
/// comes out flat at `σ²`.
pub fn welch(x: &[f64], dt: f64, segments: usize) -> Result<Spectrum> {
    if segments < 4 {
        return Err(Error::invalid("segments", "need at least 4"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    let len = 2 * x.len() / (segments + 1);
    if len < 8 {
        return Err(Error::TooShort { available: x.len(), required: 4 * (segments + 1) });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("periodogram input"));
    }
    let hop = len / 2;
    let window: Vec<f64> = (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos()).collect();
    let u = window.iter().map(|w| w * w).sum::<f64>() / len as f64;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut acc = vec![0.0; len];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for s in 0..segments {
        let seg = &x[s * hop..s * hop + len];
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = dt / (len as f64 * u * segments as f64);
    let dw = 2.0 * PI / (len as f64 * dt);
    // reorder from FFT layout to ascending frequency
    let neg = len / 2;
    let mut omega = Vec::with_capacity(len);
    let mut power = Vec::with_capacity(len);
    for i in 0..len {
        let k = (i + len - neg) % len;
        let f = if k >= len - neg { k as f64 - len as f64 } else { k as f64 };
        omega.push(f * dw);
        power.push(acc[k] * scale);
    }
    Ok(Spectrum { omega, power, segments, segment_len: len })
}

/// Welch estimate of one recorded channel.
pub fn periodogram(t: &Trajectory, channel: usize, segments: usize) -> Result<Spectrum> {
    if channel > 3 {
        return Err(Error::invalid("channel", "must be 0..=3"));
    }
    welch(&t.channel(channel), t.sample_interval(), segments)
}

/// Ensemble-averaged Welch estimate. Members run in parallel and are summed in
/// index order, so the result does not depend on scheduling; trajectories are
/// dropped as soon as their spectrum is taken.
pub fn ensemble_spectrum(
    p: &OptomechParams,
    s: &SteadyStateBranch,
    cfg: &SimConfig,
    channel: usize,
    segments: usize,
) -> Result<Spectrum> {
    let spectra: Vec<Spectrum> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|m| periodogram(&simulate_linear_member(p, s, cfg, m)?, channel, segments))
        .collect::<Result<_>>()?;
    let mut out = spectra[0].clone();
    for sp in &spectra[1..] {
        for (a, b) in out.power.iter_mut().zip(&sp.power) {
            *a += b;
        }
    }
    let n = spectra.len() as f64;
    out.power.iter_mut().for_each(|v| *v /= n);
    out.segments *= spectra.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effmodel::{build_effective_model, tests::p1};
    use crate::spectra::transfer_spectrum;
    use crate::steady::steady_states;
    use rand_distr::Normal;

    fn p1_params() -> OptomechParams {
        build_effective_model(&p1()).unwrap().optomech()
    }

    #[test]
    fn fixed_point_is_stationary() {
        let p = p1_params();
        let k = p.kappa;
        for s in steady_states(&p, 5.0 * k, 2.5 * k).unwrap() {
            let y = meanfield_fixed_point(&p, 5.0 * k, &s);
            let r = meanfield_rhs(&p, 5.0 * k, 2.5 * k, &y);
            assert!(r.iter().all(|v| v.abs() < 1e-9 * k * 5.0), "{r:?}");
        }
    }

    #[test]
    fn stable_fixed_point_holds() {
        let p = p1_params();
        let k = p.kappa;
        let (eta, delta) = (5.0 * k, 2.5 * k);
        let s = &steady_states(&p, eta, delta).unwrap()[0];
        let mut cfg = SimConfig::new(0.02 / k, 0);
        cfg.initial = meanfield_fixed_point(&p, eta, s);
        // 10³ mechanical periods
        cfg.steps = (1000.0 * 2.0 * PI / p.omega_m / cfg.dt) as usize;
        cfg.record_stride = 1000;
        let t = simulate_meanfield(&p, eta, delta, &cfg).unwrap();
        let scale = cfg.initial.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for st in &t.states {
            for i in 0..4 {
                assert!((st[i] - cfg.initial[i]).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn perturbed_states_settle_or_leave() {
        let p = p1_params();
        let k = p.kappa;
        let (eta, delta) = (5.0 * k, 2.5 * k);
        let branches = steady_states(&p, eta, delta).unwrap();
        assert_eq!(branches.len(), 3);
        let lower = &branches[0];
        let v = stability::classify(&p, lower);
        let mut cfg = SimConfig::new(0.02 / k, 0);
        cfg.steps = (20.0 / v.margin.abs() / cfg.dt) as usize;
        cfg.record_stride = cfg.steps;
        cfg.burn_in = 0.999;
        cfg.initial = meanfield_fixed_point(&p, eta, lower).map(|x| 1.01 * x);
        let y = *simulate_meanfield(&p, eta, delta, &cfg).unwrap().last().unwrap();
        let n = y[2] * y[2] + y[3] * y[3];
        assert!((n - lower.n).abs() <= 1e-6 * lower.n);

        let middle = &branches[1];
        cfg.steps = (200.0 / k / cfg.dt) as usize;
        cfg.record_stride = cfg.steps;
        cfg.initial = meanfield_fixed_point(&p, eta, middle).map(|x| 1.01 * x);
        let y = *simulate_meanfield(&p, eta, delta, &cfg).unwrap().last().unwrap();
        let n = y[2] * y[2] + y[3] * y[3];
        assert!((n - middle.n).abs() > 0.05 * middle.n);
    }

    #[test]
    fn bare_cavity_relaxes() {
        let p = OptomechParams::new(1.0, 0.0, 2.0);
        let mut cfg = SimConfig::new(0.001, 2001);
        cfg.initial = [0.0; 4];
        let t = simulate_meanfield(&p, 3.0, 0.0, &cfg).unwrap();
        for (time, st) in t.times.iter().zip(&t.states) {
            let exact = 1.5 * (1.0 - (-2.0 * time).exp());
            assert!((st[2] - exact).abs() < 1e-12, "{} vs {}", st[2], exact);
            assert_eq!(st[3], 0.0);
        }
    }

    #[test]
    fn rk4_order() {
        let p = p1_params();
        let k = p.kappa;
        let (eta, delta) = (4.0 * k, 2.0 * k);
        let end = |dt: f64| {
            let mut cfg = SimConfig::new(dt, (20.0 / k / dt).round() as usize + 1);
            cfg.initial = [0.3, -0.2, 1.0, 0.5];
            *simulate_meanfield(&p, eta, delta, &cfg).unwrap().last().unwrap()
        };
        let dist = |a: [f64; 4], b: [f64; 4]| (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        let (a, b, c) = (end(0.04 / k), end(0.02 / k), end(0.01 / k));
        let ratio = dist(a, b) / dist(b, c);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }

    #[test]
    fn step_bound_and_divergence() {
        let p = OptomechParams::new(1.0, 0.0, 1.0);
        let cfg = SimConfig::new(0.2, 10);
        assert!(matches!(simulate_meanfield(&p, 1.0, 0.0, &cfg), Err(Error::StepTooLarge { .. })));
        let mut cfg = SimConfig::new(0.01, 10);
        cfg.initial = [2e12, 0.0, 0.0, 0.0];
        assert!(matches!(simulate_meanfield(&p, 1.0, 0.0, &cfg), Err(Error::Diverged { .. })));
        cfg.initial = [0.0; 4];
        cfg.burn_in = 1.0;
        assert!(simulate_meanfield(&p, 1.0, 0.0, &cfg).is_err());
    }

    fn branch(c_s: f64, delta_tilde: f64) -> SteadyStateBranch {
        SteadyStateBranch { n: c_s * c_s, c_s, x_m: 0.0, p_m: 0.0, delta_tilde, residual: 0.0, fold: false }
    }

    #[test]
    fn silent_run_stays_at_zero() {
        let p = OptomechParams::new(0.5, 0.1, 1.0);
        let mut cfg = SimConfig::new(0.01, 5000);
        cfg.convention = NoiseConvention::zero();
        let t = simulate_linear(&p, &branch(1.0, 0.7), &cfg).unwrap();
        assert!(t.states.iter().all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = OptomechParams::new(0.5, 0.1, 1.0);
        let mut cfg = SimConfig::new(0.01, 3000);
        cfg.seed = 42;
        let a = simulate_linear_member(&p, &branch(1.0, 0.7), &cfg, 3).unwrap();
        let b = simulate_linear_member(&p, &branch(1.0, 0.7), &cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_linear_member(&p, &branch(1.0, 0.7), &cfg, 4).unwrap();
        assert_ne!(a.states, c.states);
        assert_eq!(a.states.len(), 3000);
    }

    #[test]
    fn unstable_state_rejected() {
        let p = p1_params();
        let k = p.kappa;
        let s = &steady_states(&p, 5.0 * k, 2.5 * k).unwrap()[1];
        assert!(matches!(
            simulate_linear(&p, s, &SimConfig::new(0.01 / k, 10)),
            Err(Error::UnstableState { .. })
        ));
    }

    /// Solve `A P + P Aᵀ + Q = 0` for symmetric 2×2 `P`.
    fn lyapunov2(a: [[f64; 2]; 2], q: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        // unknowns p00, p01, p11
        let m = nalgebra::Matrix3::new(
            2.0 * a[0][0], 2.0 * a[0][1], 0.0,
            a[1][0], a[0][0] + a[1][1], a[0][1],
            0.0, 2.0 * a[1][0], 2.0 * a[1][1],
        );
        let rhs = nalgebra::Vector3::new(-q[0][0], -q[0][1], -q[1][1]);
        let x = m.lu().solve(&rhs).unwrap();
        [[x[0], x[1]], [x[1], x[2]]]
    }

    #[test]
    fn uncoupled_variance_matches_lyapunov() {
        let (kappa, dt_opt) = (1.0, 0.6);
        let p = OptomechParams::new(0.5, 0.0, kappa);
        let expected = lyapunov2([[-kappa, dt_opt], [-dt_opt, -kappa]], [[2.0 * kappa, 0.0], [0.0, 2.0 * kappa]]);
        let mut cfg = SimConfig::new(0.002, 400_000);
        cfg.burn_in = 0.05;
        cfg.ensemble = 8;
        cfg.seed = 7;
        cfg.record_stride = 20;
        let runs = simulate_ensemble(&p, &branch(1.0, dt_opt), &cfg).unwrap();
        let (mut sum, mut count) = (0.0, 0usize);
        for t in &runs {
            for s in &t.states {
                sum += s[2] * s[2];
                count += 1;
            }
        }
        let var = sum / count as f64;
        assert!((var - expected[0][0]).abs() < 0.03 * expected[0][0], "{var} vs {:?}", expected);
    }

    #[test]
    fn sinusoid_peaks_in_its_bin() {
        let dt = 0.01;
        let w0 = 2.0 * PI * 3.125;
        let x: Vec<f64> = (0..8192).map(|i| (w0 * i as f64 * dt).cos()).collect();
        let sp = welch(&x, dt, 7).unwrap();
        let i = sp.peak_index(0.0, f64::INFINITY).unwrap();
        assert!((sp.omega[i] - w0).abs() <= 0.5 * sp.bin_width());
        let j = sp.peak_index(f64::NEG_INFINITY, 0.0).unwrap();
        assert!((sp.omega[j] + w0).abs() <= 0.5 * sp.bin_width());
    }

    #[test]
    fn white_noise_calibration() {
        let dt = 0.05;
        let normal = Normal::new(0.0, (1.0 / dt as f64).sqrt()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let segments = 200;
        let x: Vec<f64> = (0..256 * (segments + 1) / 2).map(|_| normal.sample(&mut rng)).collect();
        let sp = welch(&x, dt, segments).unwrap();
        let mean = sp.power.iter().sum::<f64>() / sp.power.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
        assert!(sp.omega.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn too_short_rejected() {
        assert!(matches!(welch(&[0.0; 15], 1.0, 4), Err(Error::TooShort { .. })));
        assert!(welch(&[0.0; 200], 1.0, 3).is_err());
    }

    #[test]
    fn ensemble_order_independent() {
        let p = OptomechParams::new(0.5, 0.1, 1.0);
        let mut cfg = SimConfig::new(0.02, 4096);
        cfg.ensemble = 6;
        cfg.seed = 5;
        let a = ensemble_spectrum(&p, &branch(1.0, 0.7), &cfg, 0, 4).unwrap();
        let b = ensemble_spectrum(&p, &branch(1.0, 0.7), &cfg, 0, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_ensemble_finds_the_mechanical_peak() {
        let p = p1_params();
        let k = p.kappa;
        let s = steady_states(&p, 3.0 * k, 1.5 * k).unwrap().remove(0);
        let mut cfg = SimConfig::new(0.02 / k, 200_000);
        cfg.ensemble = 8;
        cfg.record_stride = 5;
        cfg.burn_in = 0.05;
        let sp = ensemble_spectrum(&p, &s, &cfg, 0, 7).unwrap();
        let i = sp.peak_index(0.1 * p.omega_m, 3.0 * p.omega_m).unwrap();
        let grid: Vec<f64> = sp.omega.iter().copied().filter(|w| *w > 0.1 * p.omega_m && *w < 3.0 * p.omega_m).collect();
        let exact = transfer_spectrum(&p, &s, &grid, &NoiseConvention::symmetric()).unwrap();
        let best = exact.iter().max_by(|a, b| a.s_xm.total_cmp(&b.s_xm)).unwrap();
        assert!((sp.omega[i] - best.omega).abs() <= 3.0 * sp.bin_width());
    }
}
