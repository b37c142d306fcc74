// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for weak values under dissipation.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration
//! error, 3 post-selection vanishes over the whole grid, 4 a scenario check
//! failed, 5 singular weak-value inversion.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] weakval_core::Error),
    #[error("post-selection probability vanishes at every grid point")]
    AllGaps,
    #[error("scenario check failed: {0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::AllGaps | CliError::Core(weakval_core::Error::PostselectionVanishes(_)) => 3,
            CliError::Assertion(_) => 4,
            CliError::Core(weakval_core::Error::SingularInversion(_)) => 5,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "weakval", version, about = "Weak values and meter readouts under Lindblad dissipation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for noise injection.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the weak value over a grid of dissipation times.
    WeakValue {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a packaged scenario.
    Scenario(ScenarioArgs),
    /// Recover the weak value from measured quadrature averages.
    Invert {
        #[arg(long)]
        config: PathBuf,
    },
    /// Quadrature shifts of the meter over a grid of dissipation times.
    Shifts {
        #[arg(long)]
        config: PathBuf,
        /// Also run the joint system-meter simulation at every point.
        #[arg(long)]
        simulate: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    SodiumAnomalous,
    SodiumConstant,
    EstimateGamma,
    Classify,
    EstimateLambda,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::SodiumAnomalous => "sodium-anomalous",
            ScenarioName::SodiumConstant => "sodium-constant",
            ScenarioName::EstimateGamma => "estimate-gamma",
            ScenarioName::Classify => "classify",
            ScenarioName::EstimateLambda => "estimate-lambda",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChannelName {
    #[value(name = "amplitude_damping")]
    AmplitudeDamping,
    #[value(name = "nonmarkov_jc")]
    NonmarkovJc,
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    #[arg(value_enum)]
    pub name: ScenarioName,
    /// Channel for `classify`.
    #[arg(long, value_enum, default_value = "amplitude_damping")]
    pub channel: ChannelName,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Standard deviation of seeded Gaussian noise added to the trace.
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))
        .and_then(|pool| pool.install(|| commands::dispatch(&cli)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("weakval: {e}");
            e.exit_code()
        }
    }
}
