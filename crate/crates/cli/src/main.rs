// `!(v > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod files;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use log::error;

use args::{Cli, Command};

/// Bad or missing options; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<tickvol::Error>() {
            return if err.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Clean(a) => commands::clean(args::merge(&a, cfg)?),
        Command::Adjust(a) => commands::adjust(args::merge(&a, cfg)?),
        Command::Fit(a) => commands::fit(args::merge(&a, cfg)?),
        Command::Diagnose(a) => commands::diagnose(args::merge(&a, cfg)?),
        Command::Forecast(a) => commands::forecast(args::merge(&a, cfg)?),
        Command::Realized(a) => commands::realized(args::merge(&a, cfg)?),
        Command::Simulate(a) => commands::simulate(args::merge(&a, cfg)?),
    }
}
