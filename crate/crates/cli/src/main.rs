//! `hda`: runs the desk-scale OSSE pipeline step by step from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod commands;
mod error;
mod store;

use clap::{Parser, Subcommand};
use commands::Init;
use error::{CliError, Result};
use hda_core::assim::CycleMode;
use hda_core::dataset::SizeStrategy;
use hda_core::diag::{SweepKind, Verification};
use hda_core::dynamics::PredictorMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "hda", version, about = "Hybrid physics/neural-network 4D-Var experiments on two-scale Lorenz-96")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum concurrent sweep workers.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Replaces every seed of the config by values derived from this one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir` under $HDA_DATA_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Parses kebab-case enum names through their serde representation.
fn kebab<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrates the two-scale truth and draws the observations.
    GenTruth,
    /// Cycles the offline period (default strong-constraint).
    RunDa {
        #[arg(long, default_value = "sc")]
        mode: CycleMode,
        /// Network file in the output directory for network modes.
        #[arg(long)]
        net: Option<String>,
    },
    /// Builds the increment dataset from the offline archive.
    BuildDataset {
        #[arg(long, default_value = "prediction")]
        mode: PredictorMode,
    },
    /// Trains a network on a dataset with early stopping.
    TrainOffline {
        #[arg(long, default_value = "prediction")]
        mode: PredictorMode,
    },
    /// Scores the zero predictor and both networks on the test split.
    EvalOffline,
    /// Cycles the online period.
    RunOnline {
        #[arg(long, value_enum, default_value = "pretrained")]
        init: Init,
        #[arg(long, default_value = "nn4dvar")]
        mode: CycleMode,
        /// Experiment name; defaults from mode and init.
        #[arg(long)]
        name: Option<String>,
        /// Network file in the output directory for pretrained starts.
        #[arg(long)]
        net: Option<String>,
    },
    /// Analysis and forecast RMSE of online runs.
    Evaluate {
        /// Comma-separated experiment names; defaults to every online run.
        #[arg(long, value_delimiter = ',')]
        experiments: Vec<String>,
    },
    /// Forecast RMSE change against a reference run with significance.
    Scorecard {
        #[arg(long)]
        reference: String,
        #[arg(long, value_delimiter = ',')]
        experiments: Vec<String>,
        #[arg(long, default_value = "truth", value_parser = kebab::<Verification>)]
        verification: Verification,
    },
    /// Runs one experiment family over the grid in the diagnostics section.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
        /// Day selection of the dataset-size sweep.
        #[arg(long, default_value = "old-and-new", value_parser = kebab::<SizeStrategy>)]
        strategy: SizeStrategy,
    },
    /// Power spectra of the trained networks on the test split.
    Spectra,
}

fn run(cli: Cli) -> Result<()> {
    let config = cli
        .config
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let cfg = store::load_config(&config, cli.seed)?;
    let data_root = std::env::var_os("HDA_DATA_DIR").map(PathBuf::from);
    let dir = store::output_dir(cli.out.as_deref(), &cfg, data_root.as_deref());
    let s = store::Store::open(dir, cfg)?;
    match cli.command {
        Command::GenTruth => commands::gen_truth_cmd(&s),
        Command::RunDa { mode, net } => commands::run_da_cmd(&s, mode, net.as_deref()),
        Command::BuildDataset { mode } => commands::build_dataset_cmd(&s, mode),
        Command::TrainOffline { mode } => commands::train_offline_cmd(&s, mode),
        Command::EvalOffline => commands::eval_offline_cmd(&s),
        Command::RunOnline { init, mode, name, net } => commands::run_online_cmd(&s, mode, init, name.as_deref(), net.as_deref()),
        Command::Evaluate { experiments } => commands::evaluate_cmd(&s, &experiments),
        Command::Scorecard {
            reference,
            experiments,
            verification,
        } => commands::scorecard_cmd(&s, &reference, &experiments, verification),
        Command::Sweep { kind, strategy } => commands::sweep_cmd(&s, kind, strategy, cli.jobs),
        Command::Spectra => commands::spectra_cmd(&s),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hda: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
