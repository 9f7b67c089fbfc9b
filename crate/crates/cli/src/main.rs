//! `rltraj`: train the trajectory policy, compare it with the exhaustive
//! planner, time both, replay single scenes and render episode traces.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rltraj::campaign::PlannerKind;

#[derive(Debug, Parser)]
#[command(name = "rltraj", version, about = "Lattice trajectory planning with PPO and exhaustive search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy; writes a checkpoint, reward CSV and training curve.
    Train {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run matched-seed episodes under both planners and tabulate metrics.
    Compare {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the checkpoint's settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Time planning queries of both planners on the same scenes.
    Bench {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a trace as an SVG cell grid and velocity profile, with CSV series.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drive one episode from a scene snapshot and write its trace.
    Replay {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = parse_planner)]
        planner: PlannerKind,
        /// Required for the rl planner.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for rows generated beyond the snapshot.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "trace.json")]
        out: PathBuf,
    },
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse()
}

/// Errors that should be reported as usage errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train { config, resume } => commands::train(&config, resume.as_deref()),
        Command::Compare {
            ckpt,
            episodes,
            seed,
            out,
            config,
        } => commands::compare(&ckpt, episodes, seed, &out, config.as_deref()),
        Command::Bench {
            ckpt,
            queries,
            seed,
            config,
            out,
        } => commands::bench(&ckpt, queries, seed, config.as_deref(), out.as_deref()),
        Command::Plot { trace, out } => commands::plot(&trace, &out),
        Command::Replay {
            scene,
            planner,
            ckpt,
            config,
            seed,
            out,
        } => commands::replay(&scene, planner, ckpt.as_deref(), config.as_deref(), seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
