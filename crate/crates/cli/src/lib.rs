//! Command-line driver for `jumpdual`: one TOML file describes the market,
//! utility, constraint and Monte Carlo settings, and each subcommand turns it
//! into a report and CSV files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, Overrides, RunConfig};
pub use error::CliError;

use commands::Context;

#[derive(Debug, Parser)]
#[command(name = "jumpdual", version, about = "Optimal portfolios in pure-jump markets with margin frictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal weight, case, dual point and conjugacy residual per regime.
    Optimize(Common),
    /// Optimal log-utility value: closed forms and Monte Carlo.
    Value(Common),
    /// Write simulated wealth paths under the optimal policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of paths to write.
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Figure data: 1 and 3 plot h, 2 and 4 sweep the optimal weight over gamma.
    Figures {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        figure: u8,
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        pi_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        pi_max: Option<f64>,
    },
    /// Run the duality and Monte Carlo checks; exit code 3 on failure.
    Verify(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Utility exponent; 0 selects log utility.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub wealth: Option<f64>,
    /// Defaults to the config value, then $JUMPDUAL_OUTPUT_DIR, then ".".
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl Common {
    fn context(&self) -> Result<Context, CliError> {
        let mut config = RunConfig::load(&self.config)?;
        config.apply(&Overrides {
            gamma: self.gamma,
            paths: self.paths,
            seed: self.seed,
            horizon: self.horizon,
            wealth: self.wealth,
            output_dir: self.output_dir.clone(),
        });
        Context::new(config)
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Optimize(c) => commands::optimize(&c.context()?, out),
        Command::Value(c) => commands::value(&c.context()?, out),
        Command::Simulate { common, count } => commands::simulate(&common.context()?, *count, out),
        Command::Figures {
            figure,
            common,
            pi_min,
            pi_max,
        } => commands::figures(&common.context()?, *figure, *pi_min, *pi_max, out),
        Command::Verify(c) => commands::verify(&c.context()?, out),
    }
}
