//! Command-line driver for the macro placement toolkit.
//!
//! One binary, five subcommands mirroring the pipeline stages: `group`
//! derives hierarchy groups, `train` fits a placement policy, `place`
//! produces a layout from a policy or a baseline, `eval` re-scores a saved
//! layout, and `render` draws one. Exit codes: 0 success, 2 invalid input,
//! 3 no legal position available, 4 training divergence.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::GridDims;

#[derive(Parser)]
#[command(name = "macroplace", version, about = "Macro placement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON run configuration; individual flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Netlist JSON path.
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid override as ROWSxCOLS, e.g. 16x16.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridDims>,
    /// Output directory; every artifact lands under it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Derive hierarchy groups from macro names.
    Group {
        #[command(flatten)]
        common: CommonArgs,
        /// Group assignment file echoed in place of the derived grouping.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Train a placement policy.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// PPO updates to run.
        #[arg(long)]
        updates: Option<usize>,
        /// Parallel episode collectors.
        #[arg(long)]
        workers: Option<usize>,
        /// Checkpoint to warm-start from instead of a fresh model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write a greedy-layout SVG every N updates (0 disables).
        #[arg(long, default_value_t = 25)]
        snapshot_every: usize,
    },
    /// Place macros with a trained policy or a baseline.
    Place {
        #[command(flatten)]
        common: CommonArgs,
        /// Policy checkpoint rolled out greedily.
        #[arg(long, conflicts_with_all = ["sa", "random"])]
        checkpoint: Option<PathBuf>,
        /// Simulated-annealing baseline from a random legal start.
        #[arg(long, conflicts_with = "random")]
        sa: bool,
        /// Uniform random legal placement baseline.
        #[arg(long)]
        random: bool,
        /// Refine the placement with simulated annealing afterwards.
        #[arg(long)]
        post: bool,
        /// Drop the hierarchy term from the objective.
        #[arg(long)]
        zero_omega: bool,
    },
    /// Re-score a saved placement.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Placement JSON to score.
        #[arg(long)]
        placement: PathBuf,
    },
    /// Render a saved placement to SVG.
    Render {
        #[command(flatten)]
        common: CommonArgs,
        /// Placement JSON to draw.
        #[arg(long)]
        placement: PathBuf,
    },
}

fn parse_grid(s: &str) -> Result<GridDims, String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| "expected ROWSxCOLS, e.g. 16x16".to_string())?;
    let rows = r.trim().parse().map_err(|_| format!("bad row count: {r}"))?;
    let cols = c.trim().parse().map_err(|_| format!("bad column count: {c}"))?;
    Ok(GridDims { rows, cols })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
