//! `egokit` command-line front end.
//!
//! Exit codes: 0 ok, 1 usage, 2 I/O, 3 training, 4 detection, 5 evaluation.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "egokit", version, about = "Learn switching models from sensor logs and score abnormal behaviour")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train.csv, test.csv and test_gt.csv.
    Generate(GenerateArgs),
    /// Train one model per feature-case.
    Train(TrainArgs),
    /// Score a test series with trained models.
    Detect(DetectArgs),
    /// Compare anomaly traces with ground truth.
    Evaluate(EvaluateArgs),
    /// Print the feature-case ranking of a report, winner first.
    Select(SelectArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub laps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub speed: Option<f64>,
    /// Noise std as a fraction of each channel's range, overriding the default.
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    #[arg(long)]
    pub obstacle_fraction: Option<f64>,
    /// JSON file with scenario parameters; flags override it.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, conflicts_with_all = ["features", "all_features"])]
    pub feature: Option<String>,
    /// Comma-separated feature-case ids, e.g. `SP,SV`.
    #[arg(long, value_delimiter = ',', conflicts_with = "all_features")]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub all_features: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct DetectArgs {
    /// Model files; combined with `--model-dir`.
    #[arg(long, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Directory whose `model_*.json` files are all used.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long, num_args = 1..)]
    pub traces: Vec<PathBuf>,
    /// Directory whose `anomaly_*.csv` files are all used.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Moving-average window applied to θ before scoring.
    #[arg(long)]
    pub smooth: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub report: PathBuf,
}

/// Settings shared by `train` and `detect`; flags override `--config`.
#[derive(Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub r_std: Option<f64>,
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
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Select(a) => commands::select(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
