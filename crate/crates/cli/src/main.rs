//! `elasticrank`: re-rank score files, evaluate the lists, sweep parameters
//! and sample EF-Curves.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use elasticrank::Error;

#[derive(Debug, Parser)]
#[command(name = "elasticrank", version, about = "Elasticity-based fair re-ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Re-rank every user's candidates and write the lists and group utilities.
    Rerank(RerankArgs),
    /// Sample f(v; t)/|G| over a t grid and integrate EF.
    EfCurve(EfCurveArgs),
    /// Run a parameter grid and write a Pareto table.
    Sweep(SweepArgs),
    /// Score re-ranked lists against the plain top-K.
    Eval(EvalArgs),
    /// Generate a synthetic score/group dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// user_id,item_id,score CSV
    #[arg(long)]
    pub scores: PathBuf,
    /// item_id,group_id CSV
    #[arg(long)]
    pub groups: PathBuf,
    /// k-core threshold on user and item interaction counts
    #[arg(long, default_value_t = 0)]
    pub min_interactions: usize,
    /// Groups with fewer items are merged into one infrequent group
    #[arg(long, default_value_t = 10)]
    pub infrequent_threshold: usize,
    /// Shuffle the user arrival order with this seed (file order when absent)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EfArgs {
    /// Half-width M of the EF window [1 - M, 1 + M]
    #[arg(long, default_value_t = 50.0)]
    pub m: f64,
    /// Quadrature rule
    #[arg(long, default_value = "simpson", value_parser = ["simpson", "trapezoid"])]
    pub quad: String,
    /// Simpson tolerance
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Trapezoid node count
    #[arg(long)]
    pub quad_nodes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[arg(long, default_value = "elastic")]
    pub algorithm: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Anchor position as a percentage of the ascending utility order
    #[arg(long, default_value_t = 90.0)]
    pub eta: f64,
    /// Starting utility of every group
    #[arg(long, default_value_t = 1.0)]
    pub initial_utility: f64,
    #[arg(long, default_value = "selected", value_parser = ["selected", "all-candidates"])]
    pub update_scope: String,
    #[arg(long, default_value = "raw", value_parser = ["raw", "normalized"])]
    pub distance_basis: String,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub rank: RankArgs,
    /// Tax base
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    /// Fairness weight for greedy-reg
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Also write the per-user (v_g, d(g, a)) trace
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EfCurveArgs {
    /// Utilities CSV with a `utility` column (as written by rerank)
    #[arg(long)]
    pub utilities: PathBuf,
    /// Number of t samples on [1 - M, 1 + M]
    #[arg(long, default_value_t = 401)]
    pub grid: usize,
    #[command(flatten)]
    pub ef: EfArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub rank: RankArgs,
    #[command(flatten)]
    pub ef: EfArgs,
    /// Comma-separated tax bases
    #[arg(long, value_delimiter = ',', default_value = "1", allow_negative_numbers = true)]
    pub t: Vec<f64>,
    /// Comma-separated anchor percentages (overrides --eta)
    #[arg(long = "eta-grid", value_delimiter = ',')]
    pub eta_grid: Vec<f64>,
    /// Comma-separated fairness weights
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub ef: EfArgs,
    /// Ranked lists written by rerank
    #[arg(long)]
    pub lists: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Start from a named preset
    #[arg(long, value_parser = ["default", "skewed"], default_value = "default")]
    pub preset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long = "n-groups")]
    pub n_groups: Option<usize>,
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Zipf exponent of the group sizes
    #[arg(long)]
    pub skew: Option<f64>,
    /// Per-group multiplicative decay of item appeal
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(failure: &Failure) -> u8 {
    match failure {
        Failure::Runtime(_) => 1,
        Failure::Core(Error::Io(_) | Error::NonConvergent { .. } | Error::BandNotReached { .. }) => 1,
        Failure::Core(_) => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rerank(a) => commands::rerank(a),
        Command::EfCurve(a) => commands::ef_curve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
