use std::process::ExitCode;

use clap::Parser;
use lane_emden::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
