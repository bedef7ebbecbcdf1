use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    vcbound_cli::run(vcbound_cli::Cli::parse())
}
