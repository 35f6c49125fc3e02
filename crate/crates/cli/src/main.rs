use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
mod output;

/// Cluster-variation free-energy engine.
#[derive(Debug, Parser)]
#[command(name = "cvmfe", version, about)]
struct Cli {
    /// Worker threads for restarts and enumeration (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random balanced grid.
    Generate(GenerateArgs),
    /// Count configuration variables and evaluate the free energy.
    Analyze(AnalyzeArgs),
    /// Minimize a grid's free energy by conserved swaps.
    Minimize(MinimizeArgs),
    /// Run the world -> sensing -> fitted-model pipeline.
    Pipeline(PipelineArgs),
    /// Exhaustive free-energy minimum of a small grid.
    Oracle(OracleArgs),
    /// Variational free-energy decomposition for a joint table.
    Varbayes(VarbayesArgs),
}

/// Interaction strength, given either directly or as `h = exp(2 eps1)`.
#[derive(Debug, Args, Serialize)]
#[group(multiple = false)]
pub struct Interaction {
    #[arg(long, allow_negative_numbers = true)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid file to write (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub grid: PathBuf,
    /// Evaluate at this interaction; without one, h is estimated first.
    #[command(flatten)]
    pub interaction: Interaction,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[command(flatten)]
    pub interaction: Interaction,
    /// Trials per restart (default 10 N^2).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = cvmfe_core::minimize::DEFAULT_STALL_WINDOW)]
    pub stall_window: usize,
    /// Minimized grid (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial trace of the winning restart.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    /// Run summary as JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// JSON or TOML pipeline configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[command(flatten)]
    pub interaction: Interaction,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VarbayesArgs {
    /// Joint table p(psi, b) as a JSON array of rows.
    #[arg(long)]
    pub joint_json: PathBuf,
    /// Candidate q(psi) as a JSON array (default: the exact posterior).
    #[arg(long)]
    pub q_json: Option<PathBuf>,
    /// Observed blanket state (column of the joint).
    #[arg(long, default_value_t = 0)]
    pub blanket_state: usize,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Minimize(a) => commands::minimize(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Varbayes(a) => commands::varbayes(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
