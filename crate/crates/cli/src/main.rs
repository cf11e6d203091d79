mod args;
mod commands;
mod config;
mod data;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;

fn run(cli: &Cli) -> error::Result<()> {
    match &cli.command {
        Command::Convert(a) => commands::convert(a),
        Command::Agree(a) => commands::agree(a),
        Command::Train(a) => commands::train(a),
        Command::Parse(a) => commands::parse(a),
        Command::Eval(a) => commands::eval(a),
        Command::ExportCoeffs(a) => commands::export_coeffs(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn report(err: &CliError, json: bool) -> ExitCode {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("error: {err}");
    }
    ExitCode::from(err.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if std::env::args().any(|a| a == "--json-errors") {
                let message = e.render().to_string();
                let first = message
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim_start_matches("error: ");
                return report(&CliError::usage(first), true);
            }
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, cli.json_errors),
    }
}
