//! `aerotrace`: one binary, one subcommand per pipeline stage.

mod analyze;
mod args;
mod correlate;
mod error;
mod io;
mod node;
mod store;
mod traffic;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, NodeCommand};
use error::{CliResult, ExitKind};

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Node(NodeCommand::Run(a)) => node::run(a),
        Command::Store(cmd) => store::run(cmd),
        Command::Analyze(cmd) => analyze::run(cmd),
        Command::Count(a) => traffic::count(a),
        Command::Correlate(a) => correlate::run(a),
        Command::Synth(a) => traffic::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                eprintln!("error: a subcommand is required (see `aerotrace --help`)");
                return ExitCode::from(ExitKind::Usage as u8);
            }
            _ => {
                // clap's first line carries the problem; the rest is advice
                let rendered = e.to_string();
                let first = rendered.lines().next().unwrap_or("invalid arguments");
                eprintln!("{first} (see `aerotrace --help`)");
                return ExitCode::from(ExitKind::Usage as u8);
            }
        },
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
