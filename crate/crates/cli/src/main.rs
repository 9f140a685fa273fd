//! `flowcert`: synthetic data, optical flow and anytime robustness bounds for
//! video classifiers.
//!
//! Exit codes: 0 completed, 1 error, 2 adversarial example found, 3 the whole
//! ball was searched and no adversarial grid point exists.

mod args;
mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use args::RunArgs;

#[derive(Parser, Debug)]
#[command(name = "flowcert", version, about = "Robustness bounds for video classifiers under optical-flow perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic moving-blob dataset with a manifest.
    Synth(SynthArgs),
    /// Extract the optical-flow sequence of a video.
    ExtractFlow(ExtractArgs),
    /// Interleave the upper- and lower-bound searches.
    Verify(RunArgs),
    /// Upper-bound search only.
    Attack(RunArgs),
    /// Lower-bound (A*) search only.
    Certify(RunArgs),
    /// Brighten the whole clip step by step and check the decision and flows.
    Brightness(BrightnessArgs),
    /// Compare A* lower-bound traces across flow masks.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON dataset spec; fields not given take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Uniform noise amplitude, below 0.1.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// VTEN video, or a directory of PGM frames.
    #[arg(long)]
    pub video: PathBuf,
    /// Flow tensor `[l−1, h, w, 2]` as VTEN.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-flow summary JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BrightnessArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Brightening steps after step 0; step `k` adds `k · tau`.
    #[arg(long, default_value_t = 10)]
    pub steps: u32,
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// A comma-separated flow mask; repeat for each mask to compare.
    #[arg(long = "mask", required = true)]
    pub masks: Vec<String>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FLOWCERT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("FLOWCERT_THREADS={raw:?} is not a count"))?;
    anyhow::ensure!(n > 0, "FLOWCERT_THREADS must be at least 1");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker threads")
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::ExtractFlow(a) => commands::extract_flow(&a),
        Command::Verify(a) => commands::verify(&a, commands::Mode::Both),
        Command::Attack(a) => commands::verify(&a, commands::Mode::Upper),
        Command::Certify(a) => commands::verify(&a, commands::Mode::Lower),
        Command::Brightness(a) => commands::brightness(&a),
        Command::Scaling(a) => commands::scaling(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
