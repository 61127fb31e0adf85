//! Exact diagonalization of a few fermions on a momentum grid coupled to one
//! cavity mode, used to check the bosonization identities at desk scale.
//!
//! Modes are `k_j = (2π/L)(j + θ)` for `j ∈ [j_min, j_max]`. The offset `θ` is
//! `0` for odd `N_f` and `½` for even `N_f`, so the `N_f` lowest-`|k|` modes
//! always form a closed, symmetric shell with `k_F = π(N_f − 1)/L`. The kick
//! `2K = (2π/L) m` moves a fermion by exactly `m` modes.
//!
//! Energies are angular frequencies (`E/ħ`). The Hamiltonian is
//!
//! ```text
//! H = Σ_k ε(k)/ħ n_k + Δ c†c + (U_0/4) c†c Σ_k (f†_{k+2K} f_k + h.c.) + iη(c† − c)
//! ```
//!
//! Basis states are fermion bitmasks (bit `i` is mode `j_min + i`) times a
//! photon number, photon-major. Fermion operator signs follow the bit order.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::effmodel::HBAR;
use crate::error::{Error, Result};

pub const DEFAULT_DIM_CAP: usize = 100_000;
/// Sector blocks up to this size are diagonalized densely.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdConfig {
    pub j_min: i64,
    pub j_max: i64,
    pub n_f: usize,
    pub n_ph: usize,
    /// Kick in grid units: `2K = (2π/L) m`.
    pub m: u32,
    pub u0: f64,
    pub delta: f64,
    pub eta: f64,
    pub mass: f64,
    pub length: f64,
    pub dim_cap: usize,
}

impl EdConfig {
    /// A window of `modes` modes centred on the Fermi sea, η = 0.
    pub fn centered(modes: usize, n_f: usize, n_ph: usize, m: u32, u0: f64, delta: f64, mass: f64, length: f64) -> Self {
        // for even N_f the sea occupies j ∈ [−N_f/2, N_f/2 − 1]; shift so it
        // sits in the middle of the window
        let shift = if n_f.is_multiple_of(2) { 1 } else { 0 };
        let j_min = -((modes as i64 + shift) / 2);
        Self {
            j_min,
            j_max: j_min + modes as i64 - 1,
            n_f,
            n_ph,
            m,
            u0,
            delta,
            eta: 0.0,
            mass,
            length,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }

    pub fn modes(&self) -> usize {
        (self.j_max - self.j_min + 1).max(0) as usize
    }

    pub fn theta(&self) -> f64 {
        if self.n_f.is_multiple_of(2) {
            0.5
        } else {
            0.0
        }
    }

    /// `C(modes, N_f)·(n_ph + 1)`, saturating.
    pub fn dimension(&self) -> usize {
        binomial(self.modes(), self.n_f).saturating_mul(self.n_ph + 1)
    }

    fn validate(&self) -> Result<()> {
        let modes = self.modes();
        if self.j_max < self.j_min {
            return Err(Error::invalid("j_max", "must be >= j_min"));
        }
        if modes > 63 {
            return Err(Error::invalid("modes", "at most 63 modes"));
        }
        if self.n_f == 0 || self.n_f > modes {
            return Err(Error::invalid("n_f", format!("must lie in 1..={modes}")));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        for (name, v) in [("u0", self.u0), ("delta", self.delta), ("eta", self.eta)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", "must be finite and > 0"));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid("length", "must be finite and > 0"));
        }
        let dimension = self.dimension();
        if dimension > self.dim_cap {
            return Err(Error::DimensionCap { dimension, cap: self.dim_cap });
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(r).unwrap_or(usize::MAX)
}

/// Row-wise sparse complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    fn new(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim] }
    }

    fn add(&mut self, r: usize, c: usize, v: Complex64) {
        self.rows[r].push((c, v));
    }

    fn finish(&mut self) {
        for row in &mut self.rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|e| e.1 != Complex64::new(0.0, 0.0));
            *row = merged;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r]
            .binary_search_by_key(&c, |e| e.0)
            .map(|i| self.rows[r][i].1)
            .unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    /// `max |H_ij − conj(H_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.entries().map(|(r, c, v)| (v - self.get(c, r).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Apply `f†_to f_from` to a bitmask. Returns the new mask and the fermionic
/// sign, or `None` when the result vanishes.
pub fn hop(mask: u64, from: usize, to: usize) -> Option<(u64, f64)> {
    if mask & (1 << from) == 0 {
        return None;
    }
    if from == to {
        return Some((mask, 1.0));
    }
    let removed = mask & !(1 << from);
    if removed & (1 << to) != 0 {
        return None;
    }
    let below = |m: u64, bit: usize| (m & ((1u64 << bit) - 1)).count_ones();
    let parity = below(mask, from) + below(removed, to);
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    Some((removed | (1 << to), sign))
}

/// A sparse many-fermion state.
pub type FermionState = HashMap<u64, f64>;

#[derive(Clone, Debug)]
pub struct EdSystem {
    pub cfg: EdConfig,
    /// Mode momenta (rad/m), ascending.
    pub momenta: Vec<f64>,
    /// Fermion configurations, ascending.
    pub masks: Vec<u64>,
    index: HashMap<u64, usize>,
    pub hamiltonian: SparseMatrix,
    pub fermi_sea_mask: u64,
    /// Basis index of the Fermi sea with zero photons.
    pub fermi_sea: usize,
    pub big_k: f64,
    pub k_f: f64,
    pub v_f: f64,
    pub beta: f64,
    pub omega_m: f64,
    pub g: f64,
}

fn fermion_masks(modes: usize, n_f: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(binomial(modes, n_f));
    if n_f == 0 {
        return vec![0];
    }
    // Gosper's hack enumerates same-popcount masks in increasing order
    let mut x: u64 = (1u64 << n_f) - 1;
    let limit = 1u64 << modes;
    while x < limit {
        out.push(x);
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

pub fn build_system(cfg: &EdConfig) -> Result<EdSystem> {
    cfg.validate()?;
    let modes = cfg.modes();
    let unit = 2.0 * std::f64::consts::PI / cfg.length;
    let theta = cfg.theta();
    let momenta: Vec<f64> = (0..modes).map(|i| unit * ((cfg.j_min + i as i64) as f64 + theta)).collect();

    // N_f lowest-|k| modes; the grid offset makes this a closed shell
    let mut order: Vec<usize> = (0..modes).collect();
    order.sort_by(|&a, &b| momenta[a].abs().total_cmp(&momenta[b].abs()).then(a.cmp(&b)));
    let sea: Vec<usize> = order[..cfg.n_f].to_vec();
    let fermi_sea_mask = sea.iter().fold(0u64, |m, &i| m | (1 << i));
    let k_f = unit * (cfg.n_f as f64 - 1.0) / 2.0;
    if sea.iter().any(|&i| (momenta[i].abs() - k_f) > 1e-9 * unit) {
        return Err(Error::invalid("j_min/j_max", "window does not contain a symmetric Fermi sea"));
    }

    let masks = fermion_masks(modes, cfg.n_f);
    let index: HashMap<u64, usize> = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let nf = masks.len();
    let dim = nf * (cfg.n_ph + 1);
    let eps: Vec<f64> = momenta.iter().map(|k| HBAR * k * k / (2.0 * cfg.mass)).collect();
    let m = cfg.m as usize;
    let quarter = cfg.u0 / 4.0;

    let mut h = SparseMatrix::new(dim);
    for (fi, &mask) in masks.iter().enumerate() {
        let kinetic: f64 = (0..modes).filter(|&i| mask & (1 << i) != 0).map(|i| eps[i]).sum();
        for n in 0..=cfg.n_ph {
            let row = n * nf + fi;
            h.add(row, row, Complex64::new(kinetic + cfg.delta * n as f64, 0.0));
            if n > 0 && quarter != 0.0 {
                for i in 0..modes.saturating_sub(m) {
                    if let Some((to, sign)) = hop(mask, i, i + m) {
                        let col = n * nf + index[&to];
                        let v = Complex64::new(quarter * n as f64 * sign, 0.0);
                        h.add(col, row, v);
                        h.add(row, col, v);
                    }
                }
            }
            if n < cfg.n_ph && cfg.eta != 0.0 {
                let up = (n + 1) * nf + fi;
                let v = Complex64::new(0.0, cfg.eta * ((n + 1) as f64).sqrt());
                h.add(up, row, v);
                h.add(row, up, v.conj());
            }
        }
    }
    h.finish();

    let big_k = unit * m as f64 / 2.0;
    let v_f = HBAR * k_f / cfg.mass;
    let p = 2.0 * big_k;
    let beta = (2.0 * std::f64::consts::PI / (p * cfg.length)).sqrt();
    Ok(EdSystem {
        cfg: cfg.clone(),
        momenta,
        fermi_sea: index[&fermi_sea_mask],
        masks,
        index,
        hamiltonian: h,
        fermi_sea_mask,
        big_k,
        k_f,
        v_f,
        beta,
        omega_m: 2.0 * big_k * v_f,
        g: cfg.u0 / (4.0 * beta),
    })
}

impl EdSystem {
    pub fn dimension(&self) -> usize {
        self.hamiltonian.dim
    }

    pub fn fermion_dimension(&self) -> usize {
        self.masks.len()
    }

    pub fn basis_index(&self, mask: u64, photons: usize) -> Option<usize> {
        (photons <= self.cfg.n_ph).then(|| self.index.get(&mask).map(|i| photons * self.masks.len() + i))?
    }

    pub fn kinetic(&self, mask: u64) -> f64 {
        (0..self.momenta.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| HBAR * self.momenta[i].powi(2) / (2.0 * self.cfg.mass))
            .sum()
    }

    /// Mode indices of the occupied sea, ascending in momentum.
    fn sea_modes(&self) -> Vec<usize> {
        (0..self.momenta.len()).filter(|&i| self.fermi_sea_mask & (1 << i) != 0).collect()
    }

    /// Both chiral excitation channels need `m` occupied modes on their side
    /// of `k = 0` and `m` empty modes beyond the Fermi points.
    pub fn check_headroom(&self) -> Result<()> {
        let m = self.cfg.m as usize;
        let sea = self.sea_modes();
        let (lo, hi) = (sea[0], *sea.last().unwrap());
        let right = sea.iter().filter(|&&i| self.momenta[i] > 0.0).count();
        if right < m {
            return Err(Error::Headroom(format!("{right} occupied modes with k > 0, kick needs {m}")));
        }
        if hi + m >= self.momenta.len() || lo < m {
            return Err(Error::Headroom(format!(
                "need {m} empty modes beyond ±k_F; window has {} above and {} below",
                self.momenta.len() - 1 - hi,
                lo
            )));
        }
        Ok(())
    }

    /// `Σ_{k ∈ side} f†_{k+shift} f_k` applied to `state`, where `side`
    /// selects modes with `k > 0` (right) or `k < 0` (left) for both ends.
    fn apply_density(&self, state: &FermionState, shift: i64, right: bool) -> FermionState {
        let modes = self.momenta.len() as i64;
        let inside = |i: i64| i >= 0 && i < modes && (self.momenta[i as usize] > 0.0) == right && self.momenta[i as usize] != 0.0;
        let mut out = FermionState::new();
        for (&mask, &amp) in state {
            for i in 0..modes {
                let to = i + shift;
                if !inside(i) || !inside(to) {
                    continue;
                }
                if let Some((new, sign)) = hop(mask, i as usize, to as usize) {
                    *out.entry(new).or_insert(0.0) += sign * amp;
                }
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    }

    fn scaled(mut s: FermionState, f: f64) -> FermionState {
        s.values_mut().for_each(|v| *v *= f);
        s
    }

    fn sea_state(&self) -> FermionState {
        FermionState::from([(self.fermi_sea_mask, 1.0)])
    }

    /// `b_{+p}`: lowers right movers by `p`; `b†_{+p}` raises them.
    pub fn b_right(&self, s: &FermionState, dagger: bool) -> FermionState {
        let m = self.cfg.m as i64;
        Self::scaled(self.apply_density(s, if dagger { m } else { -m }, true), self.beta)
    }

    /// `b_{−p}`: raises left movers by `p`; `b†_{−p}` lowers them.
    pub fn b_left(&self, s: &FermionState, dagger: bool) -> FermionState {
        let m = self.cfg.m as i64;
        Self::scaled(self.apply_density(s, if dagger { -m } else { m }, false), self.beta)
    }

    fn sea_amplitude(&self, s: &FermionState) -> f64 {
        s.get(&self.fermi_sea_mask).copied().unwrap_or(0.0)
    }

    /// `⟨FS|[b_p, b†_p]|FS⟩`, exactly 1 with headroom.
    pub fn commutator_check(&self) -> Result<f64> {
        self.check_headroom()?;
        let fs = self.sea_state();
        let a = self.b_right(&self.b_right(&fs, true), false);
        let b = self.b_right(&self.b_right(&fs, false), true);
        Ok(self.sea_amplitude(&a) - self.sea_amplitude(&b))
    }

    /// `⟨FS|[b_p, b†_{−p}]|FS⟩`, zero for independent movers.
    pub fn cross_commutator_check(&self) -> Result<f64> {
        self.check_headroom()?;
        let fs = self.sea_state();
        let a = self.b_right(&self.b_left(&fs, true), false);
        let b = self.b_left(&self.b_right(&fs, false), true);
        Ok(self.sea_amplitude(&a) - self.sea_amplitude(&b))
    }

    /// `⟨FS|[b_p, b_p]|FS⟩`, evaluated literally.
    pub fn self_commutator_check(&self) -> Result<f64> {
        self.check_headroom()?;
        let fs = self.sea_state();
        let a = self.b_right(&self.b_right(&fs, false), false);
        Ok(self.sea_amplitude(&a) - self.sea_amplitude(&a))
    }

    /// `‖(U_0/4) Σ_k (f†_{k+2K} f_k + f†_k f_{k+2K}) |FS⟩‖` over the whole
    /// window; equals `√2 g` with headroom.
    pub fn coupling_element_check(&self) -> Result<f64> {
        self.check_headroom()?;
        let modes = self.momenta.len();
        let m = self.cfg.m as usize;
        let mut out = FermionState::new();
        for i in 0..modes.saturating_sub(m) {
            for (from, to) in [(i, i + m), (i + m, i)] {
                if let Some((new, sign)) = hop(self.fermi_sea_mask, from, to) {
                    *out.entry(new).or_insert(0.0) += sign * self.cfg.u0 / 4.0;
                }
            }
        }
        Ok(out.values().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Particle-hole energies `E(k) = 2ħK(k + K)/M` (rad/s) for `k` on the
    /// closed interval `[k_F − 2K, k_F]`.
    pub fn ph_energies(&self) -> Vec<(f64, f64)> {
        let unit = 2.0 * std::f64::consts::PI / self.cfg.length;
        (0..=self.cfg.m)
            .map(|i| {
                let k = self.k_f - 2.0 * self.big_k + unit * i as f64;
                (k, 2.0 * HBAR * self.big_k * (k + self.big_k) / self.cfg.mass)
            })
            .collect()
    }

    pub fn ph_energy_spread(&self) -> Spread {
        let rel: Vec<f64> = self.ph_energies().iter().map(|(_, e)| e / self.omega_m - 1.0).collect();
        Spread {
            mean: rel.iter().sum::<f64>() / rel.len() as f64,
            min: rel.iter().copied().fold(f64::INFINITY, f64::min),
            max: rel.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            bound: self.big_k / self.k_f,
        }
    }

    /// Real symmetric block of the `photons` sector (requires `η = 0`).
    pub fn sector_block(&self, photons: usize) -> Result<DMatrix<f64>> {
        self.sector_check(photons)?;
        let nf = self.masks.len();
        let base = photons * nf;
        let mut b = DMatrix::zeros(nf, nf);
        for r in 0..nf {
            for &(c, v) in &self.hamiltonian.rows[base + r] {
                b[(r, c - base)] = v.re;
            }
        }
        Ok(b)
    }

    fn sector_check(&self, photons: usize) -> Result<()> {
        if self.cfg.eta != 0.0 {
            return Err(Error::invalid("eta", "photon sectors need eta = 0"));
        }
        if photons > self.cfg.n_ph {
            return Err(Error::invalid("photon_sector", format!("must be <= n_ph = {}", self.cfg.n_ph)));
        }
        Ok(())
    }

    /// Lowest `count` eigenvalues (rad/s) of a photon-number sector,
    /// ascending. Dense up to [`DENSE_LIMIT`]; above it, Lanczos with full
    /// reorthogonalization, which resolves distinct levels but not their
    /// multiplicities.
    pub fn lowest_excitations(&self, photons: usize, count: usize) -> Result<Vec<f64>> {
        self.sector_check(photons)?;
        let nf = self.masks.len();
        if nf <= DENSE_LIMIT {
            let b = self.sector_block(photons)?;
            let mut ev: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.total_cmp(b));
            ev.truncate(count);
            return Ok(ev);
        }
        let base = photons * nf;
        let rows = &self.hamiltonian.rows[base..base + nf];
        let apply = |x: &DVector<f64>, y: &mut DVector<f64>| {
            for (r, row) in rows.iter().enumerate() {
                y[r] = row.iter().map(|&(c, v)| v.re * x[c - base]).sum();
            }
        };
        lanczos(nf, count, apply)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    /// Relative deviations `E/ħω_M − 1`.
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `K/k_F`.
    pub bound: f64,
}

/// Lowest `count` distinct eigenvalues of a real symmetric operator.
/// Ritz values closer than `1e-8` of the operator scale count as one level.
pub fn lanczos(dim: usize, count: usize, apply: impl Fn(&DVector<f64>, &mut DVector<f64>)) -> Result<Vec<f64>> {
    let count = count.min(dim);
    if count == 0 {
        return Ok(vec![]);
    }
    let max_iter = dim.min(300.max(8 * count));
    // deterministic start with components in every basis direction
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5));
    v /= v.norm();
    let mut basis: Vec<DVector<f64>> = vec![v];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
    let mut w = DVector::zeros(dim);
    let mut scale = 0.0f64;
    let mut last_residual = f64::INFINITY;
    for it in 0..max_iter {
        apply(&basis[it], &mut w);
        let a = basis[it].dot(&w);
        alpha.push(a);
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let b = w.norm();
        scale = scale.max(a.abs()).max(b);
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let exhausted = b <= 1e-12 * scale.max(1e-300);
        // copies of a degenerate level converge slowly and are merged
        let mut distinct: Vec<usize> = Vec::with_capacity(k);
        for &i in &idx {
            match distinct.last() {
                Some(&j) if (eig.eigenvalues[i] - eig.eigenvalues[j]).abs() <= 1e-8 * scale => {}
                _ => distinct.push(i),
            }
        }
        if distinct.len() >= count || exhausted {
            let want = &distinct[..count.min(distinct.len())];
            let residual = want.iter().map(|&i| (b * eig.eigenvectors[(k - 1, i)]).abs()).fold(0.0, f64::max);
            last_residual = residual;
            if exhausted || residual <= 1e-10 * scale {
                return Ok(want.iter().map(|&i| eig.eigenvalues[i]).collect());
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(&w / b);
    }
    Err(Error::NotConverged { residual: last_residual })
}
