use std::process::ExitCode;

use clap::Parser;
use kerrgate_cli::{execute, Cli};

fn main() -> ExitCode {
    execute(&Cli::parse())
}
