//! `storycut`: batch front end for understanding, editing, baselines,
//! metrics and export.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use storycut_core::editing::BaselineMode;
use tracing_subscriber::EnvFilter;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "storycut",
    version,
    about = "Cut highlight-driven short videos from serialized drama"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Run configuration JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replay model replies from this file instead of calling a provider.
    #[arg(long, global = true)]
    mock_fixtures: Option<PathBuf>,
    /// Merge this run's model calls into a JSONL log usable as fixtures.
    #[arg(long, global = true)]
    seed_log: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a scene manifest from raw transcripts, faces and shots.
    Understand {
        /// Inputs JSON listing each episode's files.
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Score scenes and cut one plan per edit window.
    Edit {
        #[arg(long)]
        manifest: PathBuf,
        /// Number of top highlight clips to edit around.
        #[arg(long)]
        k: Option<usize>,
        /// Skip highlight scoring; every scene may open or close a window.
        #[arg(long)]
        no_highlight: bool,
        /// Accept every opening and ending candidate without asking the model.
        #[arg(long)]
        no_boundary: bool,
        /// Keep every scene inside each window.
        #[arg(long)]
        no_pruning: bool,
    },
    /// Single-call editing from the transcript or the scene narrations.
    Baseline {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Scene manifest (narration mode).
        #[arg(long, required_if_eq("mode", "narration"))]
        manifest: Option<PathBuf>,
        /// Understanding inputs JSON with transcripts (asr mode).
        #[arg(long, required_if_eq("mode", "asr"))]
        inputs: Option<PathBuf>,
    },
    /// Diversity and viewer metrics for a set of plans.
    Metrics {
        /// Plan files.
        #[arg(long = "plan", required = true, num_args = 1..)]
        plans: Vec<PathBuf>,
        /// Viewer annotation logs, JSON lines.
        #[arg(long)]
        logs: PathBuf,
        /// Reference plan for precision and recall.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Turn a plan into a cut list, trim commands and an EDL.
    Export {
        #[arg(long)]
        plan: PathBuf,
        /// Manifest naming each episode's source video.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Source for an episode, as EPISODE=PATH. Overrides the manifest.
        #[arg(long = "source", value_parser = commands::parse_source)]
        sources: Vec<(u32, PathBuf)>,
        /// Run the media tool after writing the cut list.
        #[arg(long)]
        run: bool,
        #[arg(long, default_value = "ffmpeg")]
        tool: String,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Asr,
    Narration,
}

impl From<ModeArg> for BaselineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Asr => BaselineMode::Asr,
            ModeArg::Narration => BaselineMode::Narration,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context::new(
        cli.global.config.as_deref(),
        cli.global.mock_fixtures.as_deref(),
        cli.global.seed_log,
        cli.global.out,
    )?;
    match cli.command {
        Command::Understand { inputs } => ctx.understand(&inputs),
        Command::Edit {
            manifest,
            k,
            no_highlight,
            no_boundary,
            no_pruning,
        } => ctx.edit(
            &manifest,
            &commands::EditFlags {
                k,
                highlight: !no_highlight,
                boundary: !no_boundary,
                pruning: !no_pruning,
            },
        ),
        Command::Baseline {
            mode,
            manifest,
            inputs,
        } => ctx.baseline(mode.into(), manifest.as_deref(), inputs.as_deref()),
        Command::Metrics {
            plans,
            logs,
            reference,
            json,
        } => ctx.metrics(&plans, &logs, reference.as_deref(), json),
        Command::Export {
            plan,
            manifest,
            sources,
            run,
            tool,
        } => ctx.export(
            &plan,
            manifest.as_deref(),
            &sources,
            run.then_some(tool.as_str()),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let default = if cli.global.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("storycut: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
