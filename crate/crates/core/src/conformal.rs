//! Split conformal calibration.
//!
//! Scores are `s_i = |y_i - y_pred_i| - u_i`, where `u_i` is the half-width
//! of a heuristic uncertainty model (zero for the null model). The calibrated
//! predictor widens every heuristic interval by the sample quantile of the
//! scores at a corrected level chosen by the requested guarantee.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coverage::{classic_order_index, level_as_ratio};
use crate::error::{check_open_unit, Error, Result};
use crate::quantiles::ScoreSet;
use crate::small_sample;

/// One calibration observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub y_true: f64,
    pub y_pred: f64,
    /// Heuristic half-width; zero for the null uncertainty model.
    pub u: f64,
    pub group: Option<String>,
}

impl CalibrationRecord {
    pub fn new(y_true: f64, y_pred: f64, u: f64) -> Self {
        Self {
            y_true,
            y_pred,
            u,
            group: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_true.is_finite() && self.y_pred.is_finite() && self.u.is_finite()) {
            return Err(Error::domain("calibration record has a non-finite field"));
        }
        if self.u < 0.0 {
            return Err(Error::domain(format!(
                "heuristic half-width must be non-negative, got {}",
                self.u
            )));
        }
        Ok(())
    }

    pub fn score(&self) -> f64 {
        (self.y_true - self.y_pred).abs() - self.u
    }
}

/// The reliability contract a predictor is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuaranteeSpec {
    /// `C_nom <= E(C) <= C_nom + 1/(N+1)`.
    Classic { c_nom: f64 },
    /// `P(C >= c_min) >= 1 - alpha`.
    SmallSample { c_min: f64, alpha: f64 },
}

impl GuaranteeSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GuaranteeSpec::Classic { c_nom } => check_open_unit("c_nom", c_nom),
            GuaranteeSpec::SmallSample { c_min, alpha } => {
                check_open_unit("c_min", c_min)?;
                check_open_unit("alpha", alpha)
            }
        }
    }
}

/// What to do when no order statistic of the calibration set can carry the
/// requested guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfeasiblePolicy {
    /// Return a predictor whose intervals cover the whole output space.
    #[default]
    Unbounded,
    /// Return [`Error::Infeasible`].
    Error,
}

/// Corrected order index chosen for a calibration set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelChoice {
    Feasible {
        m: usize,
        level: f64,
    },
    /// The guarantee would need order statistic `required_m > n_cal`.
    Infeasible {
        required_m: usize,
    },
}

/// Classic corrected level `q* = ceil((N+1) C_nom) / N`.
pub fn classic_level(n_cal: usize, c_nom: f64) -> Result<LevelChoice> {
    if n_cal == 0 {
        return Err(Error::Empty("calibration set"));
    }
    let m = classic_order_index(n_cal, level_as_ratio(c_nom)?)?;
    Ok(if m > n_cal {
        LevelChoice::Infeasible { required_m: m }
    } else {
        LevelChoice::Feasible {
            m,
            level: m as f64 / n_cal as f64,
        }
    })
}

/// Corrected order index for either guarantee.
pub fn resolve_level(n_cal: usize, spec: &GuaranteeSpec) -> Result<LevelChoice> {
    spec.validate()?;
    match *spec {
        GuaranteeSpec::Classic { c_nom } => classic_level(n_cal, c_nom),
        GuaranteeSpec::SmallSample { c_min, alpha } => {
            match small_sample::solve_level(n_cal, c_min, alpha) {
                Ok(solved) => Ok(LevelChoice::Feasible {
                    m: solved.m,
                    level: solved.q_tilde,
                }),
                Err(Error::Infeasible(_)) => Ok(LevelChoice::Infeasible {
                    required_m: n_cal + 1,
                }),
                Err(e) => Err(e),
            }
        }
    }
}

/// A calibrated conformal predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalPredictor {
    /// Order index of the correction; exceeds `n_cal` when unbounded.
    pub m: usize,
    pub n_cal: usize,
    /// `m / n_cal`, capped at one for unbounded predictors.
    pub quantile_level: f64,
    /// The `m`-th smallest score, or `None` when unbounded.
    pub correction: Option<f64>,
    pub guarantee: GuaranteeSpec,
    pub group: Option<String>,
}

impl ConformalPredictor {
    pub fn is_unbounded(&self) -> bool {
        self.correction.is_none()
    }

    /// Builds the predictor for an already resolved level.
    pub fn from_level(
        scores: &ScoreSet,
        choice: LevelChoice,
        guarantee: GuaranteeSpec,
        policy: InfeasiblePolicy,
    ) -> Result<Self> {
        let n_cal = scores.len();
        match choice {
            LevelChoice::Feasible { m, level } => Ok(Self {
                m,
                n_cal,
                quantile_level: level,
                correction: Some(scores.order_statistic(m)?),
                guarantee,
                group: None,
            }),
            LevelChoice::Infeasible { required_m } => match policy {
                InfeasiblePolicy::Error => Err(Error::Infeasible(format!(
                    "guarantee needs order statistic {required_m} of only {n_cal} scores"
                ))),
                InfeasiblePolicy::Unbounded => Ok(Self {
                    m: required_m,
                    n_cal,
                    quantile_level: 1.0,
                    correction: None,
                    guarantee,
                    group: None,
                }),
            },
        }
    }
}

/// A closed prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lo: f64,
    pub hi: f64,
    /// The correction shrank the interval past zero width and it was clamped.
    pub degenerate: bool,
}

impl PredictionInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// Conformity scores of the records.
pub fn scores(records: &[CalibrationRecord]) -> Result<ScoreSet> {
    if records.is_empty() {
        return Err(Error::Empty("calibration records"));
    }
    for r in records {
        r.validate()?;
    }
    ScoreSet::new(records.iter().map(CalibrationRecord::score).collect())
}

/// Calibrates a single predictor. Records must all share one group label or
/// all carry none.
pub fn calibrate(
    records: &[CalibrationRecord],
    spec: &GuaranteeSpec,
    policy: InfeasiblePolicy,
) -> Result<ConformalPredictor> {
    let scores = scores(records)?.into_sorted();
    let group = records[0].group.clone();
    if records.iter().any(|r| r.group != group) {
        return Err(Error::domain(
            "records span several groups; use calibrate_grouped",
        ));
    }
    let choice = resolve_level(scores.len(), spec)?;
    let mut predictor = ConformalPredictor::from_level(&scores, choice, *spec, policy)?;
    predictor.group = group;
    Ok(predictor)
}

/// Group-balanced calibration: one independent predictor per group label.
///
/// Every record must carry a label. Each name in `expected_groups` must have
/// at least one record, otherwise [`Error::MissingGroup`] is returned.
pub fn calibrate_grouped(
    records: &[CalibrationRecord],
    spec: &GuaranteeSpec,
    policy: InfeasiblePolicy,
    expected_groups: &[String],
) -> Result<BTreeMap<String, ConformalPredictor>> {
    if records.is_empty() {
        return Err(Error::Empty("calibration records"));
    }
    let mut partition: BTreeMap<String, Vec<CalibrationRecord>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let label = r
            .group
            .as_ref()
            .ok_or_else(|| Error::domain(format!("record #{i} has no group label")))?;
        partition.entry(label.clone()).or_default().push(r.clone());
    }
    if let Some(missing) = expected_groups.iter().find(|g| !partition.contains_key(*g)) {
        return Err(Error::MissingGroup(missing.clone()));
    }
    partition
        .into_iter()
        .map(|(label, group)| calibrate(&group, spec, policy).map(|p| (label, p)))
        .collect()
}

/// Interval `[y_pred - u - Q, y_pred + u + Q]` for a new prediction.
///
/// A negative correction larger than `u` would invert the interval; the
/// width is then clamped to zero and the interval marked degenerate.
pub fn predict_interval(predictor: &ConformalPredictor, y_pred: f64, u: f64) -> PredictionInterval {
    let Some(correction) = predictor.correction else {
        return PredictionInterval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            degenerate: false,
        };
    };
    let half = u + correction;
    if half < 0.0 {
        PredictionInterval {
            lo: y_pred,
            hi: y_pred,
            degenerate: true,
        }
    } else {
        PredictionInterval {
            lo: y_pred - half,
            hi: y_pred + half,
            degenerate: false,
        }
    }
}
