mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use riskeig::{Exec, SolveMode};

const SOLVE_FILES: &str = "\
Files written to --out:
  report.json    full solve report (rungs, final eigenpair, policy, diagnostics)
  rungs.csv      n, rho_n, iterations, cw_gap (one row per rung)
  policy.json    extracted policy as {\"action_index\": [...]}
  manifest.json  run manifest, written last";

const PIA_FILES: &str = "\
Files written to --out:
  report.json    full trace (iterates, final eigenpair, stopping reason)
  iters.csv      k, lambda_k, max_theta, policy_changes
  policy.json    final policy as {\"action_index\": [...]}
  manifest.json  run manifest, written last";

const ORACLE_FILES: &str = "\
Files written to --out:
  report.json    lambda_star, minimizing policy and its Perron vector
  oracle.csv     policy, value, reducible (one row per policy; policy is the
                 dot-joined action indices, value the log Perron root in
                 discrete time or the dominant eigenvalue in continuous time)
  policy.json    minimizing policy
  manifest.json  run manifest, written last";

const SIMULATE_FILES: &str = "\
Files written to --out:
  report.json    estimate with batch-means confidence interval
  manifest.json  run manifest, written last";

const COMPARE_FILES: &str = "\
Files written to --out:
  report.json    per-method results and skipped steps
  compare.csv    method, lambda, ci_low, ci_high, diff_vs_oracle, diff_vs_ladder
  manifest.json  run manifest, written last
Existing output is never overwritten without --force.";

/// Risk-sensitive ergodic control: eigenpairs, policy iteration, enumeration
/// and Monte Carlo for controlled Markov chains given as JSON models.
///
/// Exit codes: 0 success, 1 model validation failure, 2 solver did not
/// converge, 3 usage error.
#[derive(Debug, Parser)]
#[command(name = "riskeig", version)]
struct Cli {
    /// Worker threads for parallel kernels.
    #[arg(long, global = true, env = "RISKEIG_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model (and the builder's Lyapunov certificate, if any); prints JSON.
    Validate(ValidateArgs),
    /// Truncation ladder of Dirichlet eigenproblems.
    #[command(after_help = SOLVE_FILES)]
    Solve(SolveArgs),
    /// Policy iteration with eigenpair value determination.
    #[command(after_help = PIA_FILES)]
    Pia(PiaArgs),
    /// Exhaustive enumeration of deterministic stationary policies.
    #[command(after_help = ORACLE_FILES)]
    Oracle(OracleArgs),
    /// Monte Carlo estimate of a policy's risk-sensitive cost.
    #[command(after_help = SIMULATE_FILES)]
    Simulate(SimulateArgs),
    /// Ladder, policy iteration, oracle (when feasible) and simulation side by side.
    #[command(after_help = COMPARE_FILES)]
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "riskeig-out")]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Stable,
    NearMonotone,
}

impl From<ModeArg> for SolveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stable => SolveMode::Stable,
            ModeArg::NearMonotone => SolveMode::NearMonotone,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    pub model: PathBuf,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    pub model: PathBuf,
    /// Comma-separated rung sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', conflicts_with = "auto")]
    pub rungs: Option<Vec<usize>>,
    /// Doubling rungs from 16 up to the truncation (the default).
    #[arg(long)]
    pub auto: bool,
    /// Per-rung eigen-solver tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Stopping threshold between consecutive rungs.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_rho: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Stable)]
    pub mode: ModeArg,
    /// Comma-separated watch states (default: the first 32).
    #[arg(long, value_delimiter = ',')]
    pub watch: Option<Vec<usize>>,
    /// Near-monotone mode: estimate of the lower cost bound; sampled when absent.
    #[arg(long)]
    pub lambda_m: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PiaArgs {
    pub model: PathBuf,
    /// `uniform` (action 0 everywhere) or a policy file.
    #[arg(long, default_value = "uniform")]
    pub init: String,
    /// Restrict to the first N states.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    pub model: PathBuf,
    /// Refuse models with more policies than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u128,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    pub model: PathBuf,
    /// Policy file, `{"action_index": [...]}`.
    #[arg(long)]
    pub policy: PathBuf,
    /// Steps (discrete time) or time units (continuous time).
    #[arg(long)]
    pub horizon: f64,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    /// Start state (default: the reference state).
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Stable)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Oracle is skipped above this many policies.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u128,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 3 } else { 0 });
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(3);
    }
    let exec = if cli.threads == 1 {
        Exec::serial()
    } else {
        Exec::with_threads(cli.threads)
    };
    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Solve(a) => commands::solve(a, &exec),
        Command::Pia(a) => commands::pia(a, &exec),
        Command::Oracle(a) => commands::oracle(a, &exec),
        Command::Simulate(a) => commands::simulate(a, &exec),
        Command::Compare(a) => commands::compare(a, &exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
