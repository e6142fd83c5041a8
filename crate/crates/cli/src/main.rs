//! `morphrom` command-line entry point.

mod bench;
mod config;
mod learn;
mod morph;
mod offline;
mod online;
mod output;
mod report;
mod svg;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes shared by all commands.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const OUT_OF_DISTRIBUTION: u8 = 2;
    pub const MAX_ITERATIONS: u8 = 3;
}

#[derive(Parser)]
#[command(name = "morphrom", version, about = "Elasticity-based mesh morphing and reduced-order pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON configuration document.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Override a configuration field, e.g. `--set morph.gamma=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Clone)]
pub struct Batch {
    #[command(flatten)]
    common: Common,
    /// Worker threads for per-sample work; outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a plate or airfoil family with its manifest.
    Synth(Common),
    /// Run one high-fidelity morphing.
    Morph(Common),
    /// Morph a training family and build a reduced model.
    Offline(Batch),
    /// Solve targets with a reduced model.
    Online(Batch),
    /// Train a scalar regression model.
    Learn(Common),
    /// Predict scalars with a trained model.
    Predict(Common),
    /// Render SVG plots from run artifacts.
    Report(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MORPHROM_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Synth(c) => synth::run(c),
        Command::Morph(c) => morph::run(c),
        Command::Offline(b) => offline::run(b),
        Command::Online(b) => online::run(b),
        Command::Learn(c) => learn::run_learn(c),
        Command::Predict(c) => learn::run_predict(c),
        Command::Report(c) => report::run(c),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let msg = format!("{e:#}");
            eprintln!("{}", serde_json::json!({ "status": "error", "message": msg }));
            ExitCode::from(exit::ERROR)
        }
    }
}
