//! Conformal calibration of uncertainty models for surrogate regressors.
//!
//! Residual scores from a calibration set are turned into a correction that
//! widens heuristic prediction intervals. Two contracts are supported:
//!
//! * the classic marginal guarantee `C_nom <= E(C) <= C_nom + 1/(N+1)`;
//! * a per-predictor guarantee `P(C >= c_min) >= 1 - alpha` that stays
//!   informative for small calibration sets.
//!
//! Both rest on the exact law of the coverage of an order-statistic
//! predictor, `C ~ Beta(m, N - m + 1)` ([`CoverageLaw`]). The crate also
//! plans calibration-set sizes ([`min_calibration_size`]), audits coverage on
//! finite test sets ([`audit()`]) and ships a Monte Carlo harness
//! ([`run_experiment`]) to check every analytic claim empirically.

pub mod audit;
pub mod conformal;
pub mod coverage;
pub mod error;
pub mod mc;
pub mod quantiles;
pub mod rng;
pub mod small_sample;
pub mod special;

pub use audit::{audit, clopper_pearson, count_hits, AuditRow, CoverageAudit};
pub use conformal::{
    calibrate, calibrate_grouped, classic_level, predict_interval, resolve_level, scores,
    CalibrationRecord, ConformalPredictor, GuaranteeSpec, InfeasiblePolicy, LevelChoice,
    PredictionInterval,
};
pub use coverage::{
    classic_order_index, level_as_ratio, marginal_gap_classic, marginal_gap_classic_exact,
    marginal_gap_simple, marginal_gap_simple_exact, CoverageLaw, Rational,
};
pub use error::{Error, Result};
pub use mc::{
    compare_to_law, histogram, run_experiment, CoverageSample, ErrorModel, ExperimentConfig,
    HistogramBin,
};
pub use quantiles::{order_index, sample_quantile, ScoreSet};
pub use small_sample::{
    c_min_of, g_bounds, min_calibration_size, solve_level, GBounds, PlanOptions, PlanResult,
    SolveResult, DEFAULT_PLAN_CAP,
};
pub use special::Tolerance;
