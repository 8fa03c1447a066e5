//! Configuration, scenario presets, output files and run orchestration
//! behind the `soliton-cumulants` binary.

pub mod config;
pub mod output;
pub mod run;
pub mod scenarios;

pub use config::{parse_config, parse_override, ConfigError, ObservableKind, ResolvedRun, RunConfig};
pub use run::{execute, simulate, RunError, RunSummary};
