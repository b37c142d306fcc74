// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use weakval_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    ExitCode::from(run(cli))
}
