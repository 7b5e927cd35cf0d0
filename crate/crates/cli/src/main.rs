//! `franson`: command-line front end.
//!
//! Exit codes: 0 success, 1 a scientific check failed, 2 usage or
//! configuration error.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Outcome;

fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(std::iter::once("franson".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    if let Some(n) = cli.threads {
        // an already-built pool (on replay) keeps its size, which cannot change results
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Predict(a) => commands::predict(a),
        Command::Synth(a) => commands::synth(a, &argv),
        Command::Validate(a) => commands::validate(a, &argv),
        Command::Simulate(a) => commands::simulate(a, &argv),
        Command::Analyze(a) => commands::analyze(a, &argv),
        Command::Demo(a) => commands::demo(a, &argv),
        Command::Replay(a) => match commands::replay(a) {
            Ok(args) => return run(args),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().skip(1).collect()))
}
