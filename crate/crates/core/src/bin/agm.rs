use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(agm::cli::main_with(agm::cli::Args::parse()))
}
