use std::fmt::{self, Write as _};
use std::path::Path;

use chrono::Utc;
use fermimirror::dynamics::{self, SimConfig, RNG_NAME};
use fermimirror::edlab::{build_system, EdSystem};
use fermimirror::spectra::{self, linspace};
use fermimirror::stability;
use fermimirror::steady::{self, hysteresis_trace, Direction};
use fermimirror::{
    build_effective_model, validate_regime, EffectiveModel, NoiseConvention, OptomechParams, RegimeReport, Status,
    SteadyStateBranch, SweepVariable,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ConfigError, RunConfig, SimMode, SweepVar};
use crate::csv::{self, Cell, Table};
use crate::record::{sha256_hex, OutputSet, RunRecord, CSV_SCHEMA_VERSION, RECORD_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Model,
    Steady,
    Sweep,
    Threshold,
    Spectrum,
    Simulate,
    Edcheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Steady => "steady",
            Command::Sweep => "sweep",
            Command::Threshold => "threshold",
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Edcheck => "edcheck",
        }
    }
}

/// Command-line values that take precedence over the config file. Ranges are
/// in units of `κ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    pub eta_over_kappa: Option<f64>,
    pub omega_from: Option<f64>,
    pub omega_to: Option<f64>,
    pub var: Option<SweepVar>,
    pub strict: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(fermimirror::Error),
    Io(std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(e) if e.is_input_error() => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numeric(e) => write!(f, "error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<fermimirror::Error> for CliError {
    fn from(e: fermimirror::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// How a completed run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Ok,
    /// A built-in check failed (exit 3).
    CheckFailed(String),
    /// The validity regime failed under `--strict` (exit 4).
    RegimeFailed(String),
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Ok => 0,
            Verdict::CheckFailed(_) => 3,
            Verdict::RegimeFailed(_) => 4,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Human-readable report for stdout.
    pub summary: String,
    pub verdict: Verdict,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    ov: &'a Overrides,
    out: OutputSet,
    summary: String,
    model_hash: Option<String>,
    seeds: Vec<u64>,
    rng: Option<String>,
    verdict: Verdict,
}

impl Ctx<'_> {
    fn line(&mut self, s: impl AsRef<str>) {
        self.summary.push_str(s.as_ref());
        self.summary.push('\n');
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(v).expect("json values serialize");
        bytes.push(b'\n');
        self.out.write(name, &bytes)?;
        Ok(())
    }

    fn model(&mut self) -> Result<(EffectiveModel, RegimeReport), CliError> {
        let phys = self.cfg.physical()?.to_params()?;
        let m = build_effective_model(&phys)?;
        let report = validate_regime(&m, &self.cfg.thresholds());
        self.model_hash = Some(sha256_hex(&serde_json::to_vec(&m).expect("model serializes")));
        if report.status == Status::Fail && self.ov.strict {
            let failed: Vec<&str> =
                report.checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name.as_str()).collect();
            self.verdict = Verdict::RegimeFailed(format!("validity regime failed: {}", failed.join(", ")));
        }
        Ok((m, report))
    }

    /// Drive from flags, then the command's section, then the physical block.
    fn eta(&self, m: &EffectiveModel, section: Option<f64>) -> f64 {
        self.ov.eta_over_kappa.or(section).map(|e| e * m.kappa).unwrap_or(m.eta)
    }
}

/// Execute `cmd`, writing outputs and `run.json` into `out_dir`.
pub fn run(cmd: Command, cfg: &RunConfig, ov: &Overrides, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let started = Utc::now().to_rfc3339();
    let mut ctx = Ctx {
        cfg,
        ov,
        out: OutputSet::create(out_dir)?,
        summary: String::new(),
        model_hash: None,
        seeds: vec![],
        rng: None,
        verdict: Verdict::Ok,
    };
    match cmd {
        Command::Model => cmd_model(&mut ctx)?,
        Command::Steady => cmd_steady(&mut ctx)?,
        Command::Sweep => cmd_sweep(&mut ctx)?,
        Command::Threshold => cmd_threshold(&mut ctx)?,
        Command::Spectrum => cmd_spectrum(&mut ctx)?,
        Command::Simulate => cmd_simulate(&mut ctx)?,
        Command::Edcheck => cmd_edcheck(&mut ctx)?,
    }
    if let Verdict::RegimeFailed(msg) = &ctx.verdict {
        let msg = msg.clone();
        ctx.line(msg);
    }
    let record = RunRecord {
        tool: "fermimirror".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        overrides: serde_json::to_value(ov).expect("overrides serialize"),
        model_hash: ctx.model_hash.clone(),
        seeds: ctx.seeds.clone(),
        rng: ctx.rng.clone(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        started,
        finished: Utc::now().to_rfc3339(),
        files: ctx.out.manifest()?,
    };
    let mut bytes = serde_json::to_vec_pretty(&record).expect("record serializes");
    bytes.push(b'\n');
    std::fs::write(out_dir.join(RECORD_FILE), bytes)?;
    Ok(RunOutcome { record, summary: ctx.summary, verdict: ctx.verdict })
}

fn cmd_model(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, report) = ctx.model()?;
    let k = m.kappa;
    ctx.line(format!("g          = {:.6e} rad/s", m.g));
    ctx.line(format!("omega_M    = {:.6e} rad/s ({:.4} kappa)", m.omega_m, m.omega_m / k));
    ctx.line(format!("chi        = {:.6e} rad/s ({:.5} kappa)", m.chi(), m.chi() / k));
    ctx.line(format!("Delta      = {:.6e} rad/s ({:.4} kappa)", m.delta, m.delta / k));
    ctx.line(format!("omega_F    = {:.4e} rad/s", report.omega_f));
    ctx.line(format!("recoil     = {:.4e} rad/s", report.recoil));
    for c in &report.checks {
        ctx.line(format!("{:<22} {:.4e} (warn above {}) {:?}", c.name, c.value, c.threshold, c.status));
    }
    ctx.line(format!("regime     = {:?}", report.status));
    ctx.json("model.json", &json!({ "model": m, "regime": report }))
}

fn branch_rows(t: &mut Table, idx: usize, b: &SteadyStateBranch, v: &fermimirror::StabilityVerdict) {
    t.row(&[
        Cell::U(idx),
        Cell::F(b.n),
        Cell::F(b.c_s),
        Cell::F(b.x_m),
        Cell::F(b.delta_tilde),
        Cell::F(b.residual),
        Cell::U(b.fold as usize),
        Cell::S(v.class.code()),
        Cell::F(v.margin),
    ]);
}

fn cmd_steady(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, _) = ctx.model()?;
    let p = m.optomech();
    let eta = ctx.eta(&m, ctx.cfg.steady.as_ref().and_then(|s| s.eta_over_kappa));
    let branches = steady::steady_states(&p, eta, m.delta)?;
    let mut t = Table::new(csv::STEADY_HEADER);
    ctx.line(format!("eta/kappa = {}, Delta/kappa = {}", eta / m.kappa, m.delta / m.kappa));
    for (i, b) in branches.iter().enumerate() {
        let v = stability::classify(&p, b);
        branch_rows(&mut t, i, b, &v);
        ctx.line(format!(
            "branch {i}: n = {:.6e}, delta_tilde/kappa = {:.5}, {:?} (max Re lambda = {:.3e} kappa)",
            b.n,
            b.delta_tilde / m.kappa,
            v.class,
            v.margin / m.kappa
        ));
    }
    ctx.out.write("steady.csv", &t.into_bytes())?;
    Ok(())
}

fn cmd_sweep(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, _) = ctx.model()?;
    let p = m.optomech();
    let k = m.kappa;
    let section = ctx.cfg.sweep.as_ref();
    let var = ctx.ov.var.or(section.map(|s| s.variable)).unwrap_or(SweepVar::Eta);
    let (def_from, def_to) = match var {
        SweepVar::Eta => (0.0, 8.0),
        SweepVar::Delta => (-2.0, 8.0),
    };
    let from = ctx.ov.from.or(section.map(|s| s.from_over_kappa)).unwrap_or(def_from);
    let to = ctx.ov.to.or(section.map(|s| s.to_over_kappa)).unwrap_or(def_to);
    let steps = ctx.ov.steps.or(section.map(|s| s.steps)).unwrap_or(401);
    let (variable, fixed) = match var {
        SweepVar::Eta => (SweepVariable::Drive, m.delta),
        SweepVar::Delta => (SweepVariable::Detuning, ctx.eta(&m, section.and_then(|s| s.eta_over_kappa))),
    };
    let curve = steady::sweep(&p, variable, from * k, to * k, steps, fixed)?;
    let mut t = Table::new(csv::SWEEP_HEADER);
    let mut bistable = 0;
    for pt in &curve.points {
        if pt.branches.len() == 3 {
            bistable += 1;
        }
        for (i, b) in pt.branches.iter().enumerate() {
            t.row(&[
                Cell::F(pt.value),
                Cell::U(i),
                Cell::F(b.branch.n),
                Cell::F(b.branch.x_m),
                Cell::F(b.branch.delta_tilde),
                Cell::S(b.verdict.class.code()),
                Cell::U(b.branch.fold as usize),
            ]);
        }
    }
    ctx.out.write("sweep.csv", &t.into_bytes())?;
    let up = hysteresis_trace(&curve, Direction::Up);
    let down = hysteresis_trace(&curve, Direction::Down);
    ctx.line(format!(
        "swept {} from {from} to {to} kappa in {steps} steps; {bistable} samples with three branches",
        variable.name()
    ));
    for (label, tr) in [("up", &up), ("down", &down)] {
        for j in &tr.jumps {
            ctx.line(format!(
                "{label}-sweep jump after {:.5} kappa: n {:.4e} -> {}",
                j.from_value / k,
                j.n_from,
                j.n_to.map(|n| format!("{n:.4e}")).unwrap_or_else(|| "no stable branch".into())
            ));
        }
        if !tr.gaps.is_empty() {
            ctx.line(format!("{label}-sweep: {} samples without a stable branch", tr.gaps.len()));
        }
    }
    ctx.json(
        "hysteresis.json",
        &json!({ "variable": variable.name(), "fixed": fixed, "kappa": k, "up": up, "down": down }),
    )
}

fn cmd_threshold(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, _) = ctx.model()?;
    let th = steady::bistability_threshold(&m.optomech())?;
    let k = m.kappa;
    ctx.line(format!("eta_c/kappa   = {:.6}", th.eta_c / k));
    ctx.line(format!("Delta_c/kappa = {:.6}", th.delta_c / k));
    ctx.line(format!("n_c           = {:.6e}", th.n_c));
    ctx.line(format!("scan check    = {:.2e} relative", th.scan_discrepancy()));
    ctx.json(
        "threshold.json",
        &json!({
            "threshold": th,
            "eta_c_over_kappa": th.eta_c / k,
            "delta_c_over_kappa": th.delta_c / k,
            "kappa": k,
        }),
    )
}

fn pick_branch(p: &OptomechParams, eta: f64, delta: f64, index: usize) -> Result<SteadyStateBranch, CliError> {
    let mut branches = steady::steady_states(p, eta, delta)?;
    if index >= branches.len() {
        return Err(ConfigError {
            path: "branch".into(),
            message: format!("index {index} out of range: {} steady states", branches.len()),
        }
        .into());
    }
    Ok(branches.swap_remove(index))
}

fn convention(path: &str, name: &str) -> Result<NoiseConvention, CliError> {
    NoiseConvention::by_name(name).map_err(|e| ConfigError { path: path.into(), message: e.to_string() }.into())
}

fn cmd_spectrum(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, _) = ctx.model()?;
    let p = m.optomech();
    let k = m.kappa;
    let section = ctx.cfg.spectrum.as_ref();
    let eta = ctx.eta(&m, section.and_then(|s| s.eta_over_kappa));
    let branch = section.map(|s| s.branch).unwrap_or(0);
    let s = pick_branch(&p, eta, m.delta, branch)?;
    let conv = convention("spectrum.convention", section.map(|s| s.convention.as_str()).unwrap_or("vacuum"))?;
    let from = ctx.ov.omega_from.or(section.map(|s| s.omega_from_over_kappa)).unwrap_or(-1.0);
    let to = ctx.ov.omega_to.or(section.map(|s| s.omega_to_over_kappa)).unwrap_or(1.0);
    let points = ctx.ov.steps.or(section.map(|s| s.points)).unwrap_or(1001);
    let grid = linspace(from * k, to * k, points);
    let transfer = spectra::transfer_spectrum(&p, &s, &grid, &conv)?;
    let closed = spectra::closed_form_spectrum(&p, &s, &grid)?;
    let corrected = spectra::corrected_spectrum(&p, &s, &grid)?;
    let mut t = Table::new(csv::SPECTRUM_HEADER);
    for ((a, b), c) in transfer.iter().zip(&closed).zip(&corrected) {
        t.row(&[
            Cell::F(a.omega),
            Cell::F(a.s_xm),
            Cell::F(a.s_xc),
            Cell::F(a.s_pc),
            Cell::F(b.s_xm),
            Cell::F(b.s_xc),
            Cell::F(b.s_pc),
            Cell::F(c.s_xc),
            Cell::F(c.s_pc),
        ]);
    }
    ctx.out.write("spectrum.csv", &t.into_bytes())?;
    let peak = transfer.iter().max_by(|a, b| a.s_xm.total_cmp(&b.s_xm)).expect("grid is non-empty");
    ctx.line(format!(
        "branch {branch}: n = {:.5e}, delta_tilde/kappa = {:.5}; {} points, {} convention",
        s.n,
        s.delta_tilde / k,
        points,
        conv.name()
    ));
    ctx.line(format!("S_XM peak {:.5e} at omega/kappa = {:.5}", peak.s_xm, peak.omega / k));
    Ok(())
}

fn cmd_simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    let (m, _) = ctx.model()?;
    let p = m.optomech();
    let k = m.kappa;
    let sec = ctx.cfg.simulate.clone().ok_or_else(|| ConfigError {
        path: "simulate".into(),
        message: "section required by this command".into(),
    })?;
    let eta = ctx.eta(&m, sec.eta_over_kappa);
    let s = pick_branch(&p, eta, m.delta, sec.branch)?;
    let mut cfg = SimConfig::new(sec.dt_kappa / k, ctx.ov.steps.unwrap_or(sec.steps));
    cfg.ensemble = sec.ensemble;
    cfg.seed = ctx.ov.seed.unwrap_or(sec.seed);
    cfg.burn_in = sec.burn_in;
    cfg.record_stride = sec.record_stride;
    cfg.convention = convention("simulate.convention", &sec.convention)?;
    ctx.seeds = vec![cfg.seed];
    match sec.mode {
        SimMode::Meanfield => {
            cfg.initial = dynamics::meanfield_fixed_point(&p, eta, &s).map(|x| x * (1.0 + sec.perturbation));
            let tr = dynamics::simulate_meanfield(&p, eta, m.delta, &cfg)?;
            let mut t = Table::new(csv::MEANFIELD_TRAJECTORY_HEADER);
            for (time, y) in tr.times.iter().zip(&tr.states) {
                let n = y[2] * y[2] + y[3] * y[3];
                t.row(&[Cell::F(*time), Cell::F(y[0]), Cell::F(y[1]), Cell::F(y[2]), Cell::F(y[3]), Cell::F(n)]);
            }
            ctx.out.write("trajectory.csv", &t.into_bytes())?;
            if let Some(y) = tr.last() {
                let n = y[2] * y[2] + y[3] * y[3];
                ctx.line(format!("start n = {:.6e} (branch {}), end n = {:.6e}", s.n, sec.branch, n));
            }
        }
        SimMode::Linear => {
            ctx.rng = Some(RNG_NAME.into());
            let tr = dynamics::simulate_linear(&p, &s, &cfg)?;
            let mut t = Table::new(csv::LINEAR_TRAJECTORY_HEADER);
            for (time, y) in tr.times.iter().zip(&tr.states) {
                t.row(&[Cell::F(*time), Cell::F(y[0]), Cell::F(y[1]), Cell::F(y[2]), Cell::F(y[3])]);
            }
            ctx.out.write("trajectory.csv", &t.into_bytes())?;
            ctx.line(format!("member 0: {} samples", tr.states.len()));
            if let Some(segments) = sec.segments {
                let sp = dynamics::ensemble_spectrum(&p, &s, &cfg, 0, segments)?;
                let exact = spectra::transfer_spectrum(&p, &s, &sp.omega, &cfg.convention);
                let mut t = Table::new(csv::PERIODOGRAM_HEADER);
                for (i, (w, v)) in sp.omega.iter().zip(&sp.power).enumerate() {
                    let e = exact.as_ref().map(|e| Cell::F(e[i].s_xm)).unwrap_or(Cell::Empty);
                    t.row(&[Cell::F(*w), Cell::F(*v), e]);
                }
                ctx.out.write("periodogram.csv", &t.into_bytes())?;
                ctx.line(format!(
                    "ensemble of {} x {} segments of {} samples, bin width {:.3e} kappa",
                    cfg.ensemble,
                    segments,
                    sp.segment_len,
                    sp.bin_width() / k
                ));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdRow {
    pub check: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn ed_row(check: &str, value: f64, expected: f64, tolerance: f64) -> EdRow {
    EdRow { check: check.into(), value, expected, tolerance, pass: (value - expected).abs() <= tolerance }
}

/// Bosonization identities and energy scales of one ED system.
pub fn ed_rows(sys: &EdSystem) -> Result<Vec<EdRow>, fermimirror::Error> {
    let root2g = 2f64.sqrt() * sys.g;
    let spread = sys.ph_energy_spread();
    let mut rows = vec![
        ed_row("commutator [b_p, b_p^dag]", sys.commutator_check()?, 1.0, 1e-12),
        ed_row("commutator [b_p, b_-p^dag]", sys.cross_commutator_check()?, 0.0, 1e-12),
        ed_row("commutator [b_p, b_p]", sys.self_commutator_check()?, 0.0, 1e-12),
        ed_row("coupling norm / (sqrt2 g)", sys.coupling_element_check()? / root2g, 1.0, 1e-12),
        ed_row("spread max / (K/k_F)", spread.max / spread.bound, 1.0, 1e-12),
        ed_row("spread min / (K/k_F)", spread.min / spread.bound, -1.0, 1e-12),
    ];
    if sys.cfg.n_ph >= 1 && sys.cfg.u0 != 0.0 {
        // second-order shift of the dressed ground state against the
        // bosonized −2g²/ω_M; the dispersion spread bounds the ratio
        let bare = sys.kinetic(sys.fermi_sea_mask) + sys.cfg.delta;
        let shift = sys.lowest_excitations(1, 1)?[0] - bare;
        let ratio = shift / (-2.0 * sys.g * sys.g / sys.omega_m);
        let b = spread.bound;
        let slack = 4.0 * (root2g / sys.omega_m).powi(2);
        let (lo, hi) = (1.0 / (1.0 + b) - slack, 1.0 / (1.0 - b) + slack);
        let mid = 0.5 * (lo + hi);
        rows.push(ed_row("level shift / bosonized", ratio, mid, 0.5 * (hi - lo)));
    }
    Ok(rows)
}

fn cmd_edcheck(ctx: &mut Ctx) -> Result<(), CliError> {
    let sec = ctx.cfg.edcheck.clone().ok_or_else(|| ConfigError {
        path: "edcheck".into(),
        message: "section required by this command".into(),
    })?;
    let sys = build_system(&sec.to_config())?;
    let rows = ed_rows(&sys)?;
    let mut levels = Vec::new();
    for n in 0..=sys.cfg.n_ph {
        levels.push(json!({ "photons": n, "levels": sys.lowest_excitations(n, sec.levels)? }));
    }
    let mut table = String::new();
    writeln!(table, "{:<28} {:>22} {:>22} {:>10}  result", "check", "value", "expected", "tol").unwrap();
    for r in &rows {
        writeln!(
            table,
            "{:<28} {:>22.15e} {:>22.15e} {:>10.1e}  {}",
            r.check,
            r.value,
            r.expected,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    ctx.summary.push_str(&table);
    ctx.line(format!(
        "dimension {} ({} fermion states x {} photon levels), omega_M = {:.6e} rad/s, g = {:.6e} rad/s",
        sys.dimension(),
        sys.fermion_dimension(),
        sys.cfg.n_ph + 1,
        sys.omega_m,
        sys.g
    ));
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if !failed.is_empty() {
        ctx.verdict = Verdict::CheckFailed(format!("edcheck failed: {}", failed.join(", ")));
    }
    ctx.json(
        "edcheck.json",
        &json!({
            "config": sys.cfg,
            "dimension": sys.dimension(),
            "k_f": sys.k_f,
            "big_k": sys.big_k,
            "beta": sys.beta,
            "omega_m": sys.omega_m,
            "g": sys.g,
            "checks": rows,
            "spectrum": levels,
        }),
    )
}
