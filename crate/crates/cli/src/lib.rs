//! Command-line front end: train / eval / replay / scenarios.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

pub mod config;
pub mod svg;

mod commands;

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rcnav",
    version,
    about = "Risk-aware crowd navigation: simulation, training and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the navigation policy with TD3 on the training scenario
    Train(TrainArgs),
    /// Evaluate a policy over the crowd-behavior suite
    Eval(EvalArgs),
    /// Render a logged episode to an SVG trajectory figure
    Replay(ReplayArgs),
    /// List the available crowd behaviors
    Scenarios,
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file (key = value sections); defaults apply without it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for run outputs
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override (falls back to config, then $RCNAV_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Episode count override
    #[arg(long)]
    episodes: Option<u64>,
    /// Critical-obstacle count K override
    #[arg(long)]
    k: Option<usize>,
    /// Collision-probability blend weight override
    #[arg(long)]
    alpha: Option<f64>,
    /// Obstacle count override
    #[arg(long)]
    obstacles: Option<usize>,
    /// Obstacle speed override (m/s)
    #[arg(long)]
    speed: Option<f64>,
    /// Save a checkpoint every N episodes (0 = final only)
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy source: a trained checkpoint or the scripted baseline
    #[arg(long, value_parser = ["checkpoint", "scripted"], default_value = "checkpoint")]
    policy: String,
    /// Checkpoint file (required for --policy checkpoint)
    #[arg(long, required_if_eq("policy", "checkpoint"))]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per behavior
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated behaviors (default: crossing,towards,ahead,random)
    #[arg(long)]
    behaviors: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    obstacles: Option<usize>,
    #[arg(long)]
    speed: Option<f64>,
    /// Also report scores with N = steps that saw a tracked obstacle
    #[arg(long)]
    tracked_n: bool,
    /// Include per-track perception dumps in the episode logs
    #[arg(long)]
    log_tracks: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Episode log (JSONL) to render
    #[arg(long)]
    log: PathBuf,
    /// Output SVG path
    #[arg(long)]
    out: PathBuf,
    /// Arena half extent override when the log carries no meta line
    #[arg(long)]
    half_extent: Option<f64>,
}

/// Entry point minus the process boundary; `argv` excludes the binary name.
pub fn run(argv: Vec<String>) -> i32 {
    run_captured(argv, &mut std::io::stdout())
}

/// Like [`run`] but with stdout captured, for tests.
pub fn run_captured(argv: Vec<String>, out: &mut dyn Write) -> i32 {
    let full = std::iter::once("rcnav".to_string()).chain(argv);
    let cli = match Cli::try_parse_from(full) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    eprintln!("{e}");
                    1
                }
            }
        }
    };
    match commands::execute(cli.cmd, out) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("rcnav: {err:#}");
            2
        }
    }
}
