use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fermimirror_cli::config::SweepVar;
use fermimirror_cli::{parse_config, run, Command, Overrides, Verdict};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Model,
    Steady,
    Sweep,
    Threshold,
    Spectrum,
    Simulate,
    Edcheck,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Var {
    Eta,
    Delta,
}

/// Fermionic-mirror cavity optomechanics.
///
/// Exit codes: 0 ok, 2 configuration error, 3 numerical or check failure,
/// 4 validity-regime failure (with --strict).
#[derive(Debug, Parser)]
#[command(name = "fermimirror", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep start, in units of kappa.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Sweep end, in units of kappa.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    /// Sweep samples, spectrum points or simulation steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    eta_over_kappa: Option<f64>,
    /// Spectrum grid start, in units of kappa.
    #[arg(long, allow_hyphen_values = true)]
    omega_from: Option<f64>,
    /// Spectrum grid end, in units of kappa.
    #[arg(long, allow_hyphen_values = true)]
    omega_to: Option<f64>,
    /// Swept variable.
    #[arg(long, value_enum)]
    var: Option<Var>,
    /// Exit with status 4 when the validity regime fails.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Sub::Model => Command::Model,
        Sub::Steady => Command::Steady,
        Sub::Sweep => Command::Sweep,
        Sub::Threshold => Command::Threshold,
        Sub::Spectrum => Command::Spectrum,
        Sub::Simulate => Command::Simulate,
        Sub::Edcheck => Command::Edcheck,
    };
    let ov = Overrides {
        seed: cli.seed,
        from: cli.from,
        to: cli.to,
        steps: cli.steps,
        eta_over_kappa: cli.eta_over_kappa,
        omega_from: cli.omega_from,
        omega_to: cli.omega_to,
        var: cli.var.map(|v| match v {
            Var::Eta => SweepVar::Eta,
            Var::Delta => SweepVar::Delta,
        }),
        strict: cli.strict,
    };
    let out = cli
        .out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run(command, &cfg, &ov, &out) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            match &outcome.verdict {
                Verdict::Ok => {}
                Verdict::CheckFailed(m) | Verdict::RegimeFailed(m) => eprintln!("{m}"),
            }
            ExitCode::from(outcome.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
