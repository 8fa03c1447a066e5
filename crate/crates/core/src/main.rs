use std::process::ExitCode;

use clap::{Parser, Subcommand};
use soliton_cumulants::cli::{self, run::validate_config, scenarios, RunError};

#[derive(Parser)]
#[command(name = "soliton-cumulants", version, about = "Cumulant dynamics of damped quantum solitons")]
struct Cli {
    /// Print the built-in scenario presets and exit.
    #[arg(long)]
    list_scenarios: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON config file or a named preset.
    Run {
        /// Path to a JSON config.
        config: Option<String>,
        /// Use a built-in preset instead of a file.
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Override a config key, e.g. `--override gamma_t=0.05`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Check the config and print the resolved parameters without running.
        #[arg(long)]
        validate_only: bool,
    },
}

fn load(config: Option<String>, scenario: Option<String>, overrides: &[String]) -> Result<cli::RunConfig, RunError> {
    let text = match (config, scenario) {
        (Some(path), None) => std::fs::read_to_string(&path)?,
        (None, Some(name)) => match scenarios::find(&name) {
            Some(sc) => sc.config.to_string(),
            None => {
                return Err(RunError::Config(cli::ConfigError::Invalid(format!(
                    "unknown scenario `{name}`; see --list-scenarios"
                ))))
            }
        },
        _ => {
            return Err(RunError::Config(cli::ConfigError::Invalid(
                "give a config path or --scenario".into(),
            )))
        }
    };
    Ok(cli::parse_config(&text, overrides)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    if args.list_scenarios {
        for sc in scenarios::all() {
            println!("{:<32} {}", sc.name, sc.description);
        }
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run { config, scenario, overrides, validate_only }) = args.command else {
        eprintln!("nothing to do; try `soliton-cumulants run --help`");
        return ExitCode::from(2);
    };
    let result = load(config, scenario, &overrides).and_then(|cfg| {
        if validate_only {
            let runs = validate_config(&cfg)?;
            for r in runs {
                let summary = serde_json::json!({
                    "s": r.coeffs.s,
                    "grid": r.grid,
                    "params": r.params,
                    "coefficients": r.coeffs,
                    "output_times": r.times,
                });
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            }
            Ok(())
        } else {
            let summary = cli::execute(&cfg)?;
            for c in &summary.consistency {
                println!(
                    "t = {}: cumulants {:.3e}, intensity {:.3e}, spectrum {}, eta {}",
                    c.t,
                    c.cumulants,
                    c.intensity,
                    c.spectrum.map_or("-".into(), |v| format!("{v:.3e}")),
                    c.eta.map_or("-".into(), |v| format!("{v:.3e}")),
                );
            }
            println!("wrote {}", summary.output_dir.join("manifest.json").display());
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
