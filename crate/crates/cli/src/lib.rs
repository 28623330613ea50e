//! Command-line front end for `confcal-core`.
//!
//! Every subcommand produces a [`ReportEnvelope`], printed either as aligned
//! text or, with `--json`, as a single JSON line. Exit codes: 0 success,
//! 1 input or usage error, 2 guarantee infeasible.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod io;
pub mod report;

pub use report::ReportEnvelope;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
        }
    }
}

impl From<confcal_core::Error> for CliError {
    fn from(e: confcal_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// A finished command: its report and the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: ReportEnvelope,
    pub exit_code: i32,
}

impl Outcome {
    pub fn ok(report: ReportEnvelope) -> Self {
        Self {
            report,
            exit_code: EXIT_OK,
        }
    }

    pub fn infeasible(report: ReportEnvelope) -> Self {
        Self {
            report,
            exit_code: EXIT_INFEASIBLE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "confcal",
    version,
    about = "Conformal calibration toolkit for surrogate-model uncertainty"
)]
pub struct Cli {
    /// Emit one JSON line instead of aligned text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate a conformal predictor from a CSV of residuals.
    Calibrate(CalibrateArgs),
    /// Smallest order index meeting P(C >= c_min) >= 1 - alpha.
    SolveLevel(SolveLevelArgs),
    /// Minimum coverage reached with confidence 1 - alpha by a predictor.
    Cmin(CminArgs),
    /// Bracket the calibration size needed for a small-sample guarantee.
    PlanN(PlanArgs),
    /// Clopper-Pearson audit of prediction intervals on a test CSV.
    Audit(AuditArgs),
    /// Monte Carlo study of the coverage distribution.
    Simulate(SimulateArgs),
}

/// Classic (`--c-nom`) or small-sample (`--c-min` with `--alpha`) guarantee.
#[derive(Debug, Clone, Args)]
pub struct GuaranteeArgs {
    /// Nominal marginal coverage for the classic guarantee.
    #[arg(long, conflicts_with_all = ["c_min", "alpha"], required_unless_present = "c_min")]
    pub c_nom: Option<f64>,

    /// Minimum acceptable coverage for the small-sample guarantee.
    #[arg(long, requires = "alpha")]
    pub c_min: Option<f64>,

    /// Allowed probability of falling below --c-min.
    #[arg(long, requires = "c_min")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with header y_true,y_pred and optional u, group.
    pub input: PathBuf,

    #[command(flatten)]
    pub guarantee: GuaranteeArgs,

    /// Calibrate one predictor per `group` label.
    #[arg(long)]
    pub grouped: bool,

    /// Group that must be present when --grouped (repeatable).
    #[arg(long = "expect-group", requires = "grouped")]
    pub expect_group: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveLevelArgs {
    #[arg(long)]
    pub n_cal: usize,
    #[arg(long)]
    pub c_min: f64,
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct CminArgs {
    #[arg(long)]
    pub n_cal: usize,

    /// Order index of the predictor.
    #[arg(long, conflicts_with = "c_nom", required_unless_present = "c_nom")]
    pub m: Option<usize>,

    /// Take the order index of the classic predictor at this level.
    #[arg(long)]
    pub c_nom: Option<f64>,

    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub c_min: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Target quantile level of the predictor.
    #[arg(long)]
    pub q_tilde: f64,
    /// Accepted excess of the realized level over --q-tilde (default 1/n).
    #[arg(long)]
    pub slack: Option<f64>,
    /// Largest calibration size searched.
    #[arg(long, default_value_t = confcal_core::DEFAULT_PLAN_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// CSV with header y_true,lo,hi.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n_cal: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,

    #[command(flatten)]
    pub guarantee: GuaranteeArgs,

    /// Write histogram rows to this CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Write per-realization coverage and correction to this CSV.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Calibrate(a) => commands::calibrate(a),
        Command::SolveLevel(a) => commands::solve_level(a),
        Command::Cmin(a) => commands::cmin(a),
        Command::PlanN(a) => commands::plan_n(a),
        Command::Audit(a) => commands::audit(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

/// Renders an outcome the way the binary prints it.
pub fn render(outcome: &Outcome, json: bool) -> String {
    if json {
        let mut line = outcome.report.to_json_line();
        line.push('\n');
        line
    } else {
        outcome.report.to_text()
    }
}
