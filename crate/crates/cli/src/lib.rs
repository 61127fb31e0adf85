//! Reproducible command-line runs on top of the `fermimirror` library: JSON
//! configuration, CSV data, and a `run.json` record listing every file written.

pub mod config;
pub mod csv;
pub mod record;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
pub use record::RunRecord;
pub use run::{run, CliError, Command, Overrides, RunOutcome, Verdict};
