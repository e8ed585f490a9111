//! Command-line interface: dataset generation, training, threshold
//! estimation, aggregation sweeps, low-data studies, single-image
//! detection, and the full desk-scale reproduction pipeline.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use pedk::Error;

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 invariant violation.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::BadArchitecture(_) => 1,
        Error::Invariant(_) | Error::TrainingAborted(_) => 3,
        _ => 2,
    }
}

#[derive(Parser)]
#[command(
    name = "pedk",
    about = "Part-ensemble detection kit: train per-part CNN ensembles and a single-CNN baseline on synthetic compositional data, calibrate decision thresholds, and sweep voting rules",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Scale profile: desk (minutes on a laptop) or paper (full scale).
    #[arg(long, global = true, default_value = "desk")]
    profile: String,

    /// Load a full profile from a JSON file instead (overrides --profile).
    #[arg(long, global = true)]
    profile_file: Option<std::path::PathBuf>,

    /// Concurrent training/heatmap workers. Defaults to available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Machine-readable JSON on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset bundle (five manifest-backed datasets).
    Synth {
        /// Output directory for the dataset bundle.
        #[arg(long)]
        out: std::path::PathBuf,
        /// Optional JSON file overriding the generator config.
        #[arg(long)]
        config: Option<std::path::PathBuf>,
    },
    /// Train networks: the full 5x5 grid or a single (target, arch) pair.
    Train {
        /// Dataset bundle directory produced by `synth`.
        #[arg(long)]
        data: std::path::PathBuf,
        /// Output directory for checkpoints and tables.
        #[arg(long)]
        out: std::path::PathBuf,
        /// Train all 25 networks of the architecture grid.
        #[arg(long, conflicts_with_all = ["target", "arch"])]
        grid: bool,
        /// One target: barrel|magazine|receiver|stock|single.
        #[arg(long)]
        target: Option<String>,
        /// Architecture as MxN, e.g. 4x3.
        #[arg(long)]
        arch: Option<String>,
    },
    /// Evaluate a checkpoint on its dataset's test or validation split.
    Eval {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        checkpoint: std::path::PathBuf,
        /// Split to evaluate: test or validation.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Estimate per-network decision thresholds on whole-image validation data.
    Thresholds {
        #[arg(long)]
        data: std::path::PathBuf,
        /// Models directory holding best/<part>.pedk checkpoints.
        #[arg(long)]
        models: std::path::PathBuf,
        /// Heatmap statistic: max or mean.
        #[arg(long, default_value = "max")]
        mode: String,
        #[arg(long)]
        window_ratio: Option<f64>,
        #[arg(long)]
        step_ratio: Option<f64>,
        /// Rescale side for extracted patches (must match the checkpoints).
        #[arg(long)]
        patch_size: Option<usize>,
    },
    /// Sweep voting rules against threshold choices on the shared test set.
    Sweep {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        models: std::path::PathBuf,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
        #[arg(long)]
        window_ratio: Option<f64>,
        #[arg(long)]
        step_ratio: Option<f64>,
        #[arg(long)]
        patch_size: Option<usize>,
    },
    /// Retrain best architectures on 25/50/75/100% training subsets.
    Lowdata {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        models: std::path::PathBuf,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Detect the object in one image with the part ensemble (or --single).
    Detect {
        #[arg(long)]
        image: std::path::PathBuf,
        #[arg(long)]
        models: std::path::PathBuf,
        /// Vote rule: 1|2|3|4 (k-of-4) or weighted.
        #[arg(long, default_value = "2")]
        rule: String,
        /// Threshold choice: zero|n|i|p.
        #[arg(long, default_value = "i")]
        theta: String,
        /// Use the single-network baseline instead of the ensemble.
        #[arg(long)]
        single: bool,
        /// Write per-network heatmap PNGs into this directory.
        #[arg(long)]
        heatmaps: Option<std::path::PathBuf>,
        #[arg(long)]
        window_ratio: Option<f64>,
        #[arg(long)]
        step_ratio: Option<f64>,
        #[arg(long)]
        patch_size: Option<usize>,
    },
    /// Full pipeline: synth, grid training, thresholds, sweep, low-data study.
    ReproAll {
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
