//! Command-line front end for the joint environment/co-player curriculum
//! engine: train runs, cross-play evaluation, plotting, the selection-fixture
//! check and regret-landscape probes.

use clap::{Parser, Subcommand};
use maestro_cli::landscape::LandscapeArgs;
use maestro_cli::runner::TrainOptions;
use maestro_cli::{evalcmd, landscape, plot, runner, table1, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "maestro",
    version,
    about = "Joint environment/co-player regret curricula for two-player zero-sum games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed from a TOML experiment config.
    Train {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Continue from checkpoint_latest.json in each seed directory.
        #[arg(long)]
        resume: bool,
        /// Force bit-reproducible execution (single worker).
        #[arg(long)]
        deterministic: bool,
        /// Override the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop early after this many student updates (resumable).
        #[arg(long)]
        stop_after_updates: Option<u64>,
    },
    /// Cross-play trained checkpoints on held-out levels.
    Eval {
        /// Evaluation config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Force serial execution (results are identical either way).
        #[arg(long)]
        deterministic: bool,
    },
    /// Render SVG charts from run metrics and tournament tables.
    Plot {
        /// Directory scanned recursively for metrics.csv / tournament.json.
        #[arg(long)]
        results: PathBuf,
        /// Output directory for the SVG files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the joint-vs-independent selection values on the regret fixture.
    Table1 {
        /// Alternative fixture file (defaults to the bundled one).
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Chart a checkpoint's regret over its frozen population x new levels.
    Landscape {
        /// Training checkpoint (checkpoint_latest.json / checkpoint_final.json).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of freshly sampled environments (columns).
        #[arg(long, default_value_t = 16)]
        envs: usize,
        /// Regret estimator: "pvl" or "max_mc".
        #[arg(long, default_value = "pvl")]
        estimator: String,
        /// Seed for environment sampling and probe rollouts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the matrix to this file instead of only summarizing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Train { config, resume, deterministic, seed, out, stop_after_updates } => {
            let opts = TrainOptions {
                resume,
                deterministic,
                seed_override: seed,
                out_override: out,
                stop_after_updates,
            };
            runner::cmd_train(&config, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { config, out, deterministic } => {
            evalcmd::cmd_eval(
                &config,
                &evalcmd::EvalOptions { deterministic, out_override: out },
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { results, out } => {
            plot::cmd_plot(&results, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Table1 { fixture } => {
            let pass = table1::cmd_table1(fixture.as_deref())?;
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Landscape { checkpoint, envs, estimator, seed, out } => {
            landscape::cmd_landscape(&LandscapeArgs {
                checkpoint: &checkpoint,
                envs,
                estimator: &estimator,
                seed,
                out: out.as_deref(),
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
