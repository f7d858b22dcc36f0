//! Command-line front end for the trajectory-optimization toolkit.
//!
//! Runs TO convergence sweeps and the receding-horizon MPC benchmark from a
//! JSON config, writing results.csv, per-episode JSON records, and static
//! SVG plots into the output directory.

mod config;
mod plot;
mod run;

use anyhow::{Context, Result};
use clap::Parser;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "svto", about = "Trajectory-optimization experiment runner")]
struct Args {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config's seeds).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (falls back to the SVTO_JOBS environment variable,
    /// then to the number of cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() {
    let args = Args::parse();
    if let Err(err) = try_main(args) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn try_main(args: Args) -> Result<()> {
    let mut cfg = config::ExperimentConfig::load(&args.config)?;
    if let Some(out) = args.output {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;

    let jobs = args
        .jobs
        .or_else(|| std::env::var("SVTO_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("building worker pool")?;
    }

    let out = run::execute(&cfg)?;
    println!("results written to {}", out.display());
    Ok(())
}
