//! Command-line front end.

pub mod config;
pub mod error;
pub mod scenarios;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::Value;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Design,
    Benchmark,
    Simulate,
    CompareTft,
    GrowthSweep,
    StarSweep,
    ScalefreeTable,
}

#[derive(Debug, Parser)]
#[command(name = "incentive-net", version, about = "Design and evaluate rating protocols for information sharing")]
pub struct Cli {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, env = "INCENTIVE_NET_WORKERS")]
    pub workers: Option<usize>,
}

pub fn run(cli: &Cli) -> CliResult<Value> {
    let mut config = ScenarioConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = scenarios::output_dir(cli.out.as_deref(), &config);
    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Design => scenarios::design(&config, &out),
        Command::Benchmark => scenarios::benchmark(&config, &out),
        Command::Simulate => scenarios::simulate_scenario(&config, &out),
        Command::CompareTft => scenarios::compare_tft(&config, &out),
        Command::GrowthSweep => scenarios::growth_sweep(&config, &out),
        Command::StarSweep => scenarios::star_sweep(&config, &out),
        Command::ScalefreeTable => scenarios::scalefree_table(&config, &out),
    })
}
