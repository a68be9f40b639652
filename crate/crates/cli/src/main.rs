//! `nmpo` command-line tool.

mod args;
mod commands;
mod error;
mod grid;
mod setup;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, Common, Format};
use commands::Dataset;
use error::CliError;
use setup::{Defaults, Setup};

fn header(setup: &Setup, argv: &str) -> String {
    format!(
        "# nmpo {}\n# command: {argv}\n# params: {}\n# seed: {}\n",
        env!("CARGO_PKG_VERSION"),
        setup.describe(),
        setup.seed
    )
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| CliError::io(p, e)),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn emit(common: &Common, setup: &Setup, argv: &str, data: Dataset) -> Result<(), CliError> {
    let text = match common.format {
        Format::Csv => header(setup, argv) + &data.csv,
        Format::Json => {
            let meta = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": argv,
                "params": setup.describe(),
                "seed": setup.seed,
            });
            let mut s = serde_json::to_string_pretty(&json!({ "meta": meta, "rows": data.json }))
                .expect("serializable output");
            s.push('\n');
            s
        }
    };
    write_to(common.out.as_deref(), &text)?;
    if data.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(data.failures))
    }
}

fn run(cli: Cli, argv: &str) -> Result<(), CliError> {
    let defaults = |mu, kappa, nth| Defaults { mu, kappa, nth };
    match cli.command {
        Command::PhaseDiagram { common } => {
            let s = Setup::resolve(&common, &defaults("0:2:201", "0.05:2:201", "0"))?;
            emit(&common, &s, argv, commands::phase_diagram(&s)?)
        }
        Command::Eigenflow { common, branch } => {
            let s = Setup::resolve(&common, &defaults("0:2:401", "1.25,0.5,0.15", "0"))?;
            emit(&common, &s, argv, commands::eigenflow(&s, &branch)?)
        }
        Command::Variances {
            common,
            method,
            pump_noise,
        } => {
            let s = Setup::resolve(&common, &defaults("0:3:31", "0.1:2:20", "0"))?;
            emit(
                &common,
                &s,
                argv,
                commands::variances(&s, method, pump_noise)?,
            )
        }
        Command::Negativity {
            common,
            markovian_comparator,
            path,
        } => {
            let s = Setup::resolve(&common, &defaults("0:3:301", "0.2", "0,1,5,10"))?;
            emit(
                &common,
                &s,
                argv,
                commands::negativity(&s, markovian_comparator, path)?,
            )
        }
        Command::Simulate { common, sim } => {
            let s = Setup::resolve(&common, &defaults("2", "0.2,0.3,0.4,0.6,0.8,1,1.5", "0"))?;
            let out = commands::simulate(&s, &sim)?;
            if let (Some(path), Some(tr)) = (&sim.trajectory_out, &out.trajectory) {
                write_to(Some(path), &(header(&s, argv) + tr))?;
            }
            emit(&common, &s, argv, out.data)
        }
        Command::SteadyState { common } => {
            let s = Setup::resolve(&common, &defaults("2", "1", "0"))?;
            emit(&common, &s, argv, commands::steady_state_point(&s)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn,nmpo::model=error"),
    )
    .format_timestamp(None)
    .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let diag = json!({ "error": "usage", "message": e.render().to_string().trim_end() });
            eprintln!("{diag}");
            return ExitCode::from(2);
        }
    };
    let argv = std::env::args().collect::<Vec<_>>().join(" ");
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
