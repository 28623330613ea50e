//! Monte Carlo study of calibration randomness.
//!
//! Each realization draws a fresh calibration set of absolute errors,
//! calibrates a null-uncertainty predictor and records its exact coverage
//! `F_s(Q)`, evaluated through the analytic error CDF. No test set is
//! sampled, so the spread of the recorded coverages comes from calibration
//! alone and can be compared against the Beta coverage law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    resolve_level, ConformalPredictor, GuaranteeSpec, InfeasiblePolicy, LevelChoice,
};
use crate::coverage::CoverageLaw;
use crate::error::{Error, Result};
use crate::quantiles::ScoreSet;
use crate::rng::StreamRng;
use crate::special;

/// Distribution of the calibration errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// `|Z|` with `Z` standard normal.
    #[default]
    FoldedStdNormal,
}

impl ErrorModel {
    /// Inverse-CDF draw from a uniform in (0, 1).
    pub fn sample(&self, u: f64) -> Result<f64> {
        match self {
            ErrorModel::FoldedStdNormal => Ok(special::std_normal_quantile(u)?.abs()),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            ErrorModel::FoldedStdNormal => {
                if x <= 0.0 {
                    Ok(0.0)
                } else {
                    special::erf(x / std::f64::consts::SQRT_2)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_cal: usize,
    pub n_mc: usize,
    pub guarantee: GuaranteeSpec,
    pub seed: u64,
    pub error_model: ErrorModel,
    /// Infeasible guarantees fail by default; with `Unbounded` every
    /// realization covers everything and records coverage one.
    pub policy: InfeasiblePolicy,
}

impl ExperimentConfig {
    pub fn new(n_cal: usize, n_mc: usize, guarantee: GuaranteeSpec, seed: u64) -> Self {
        Self {
            n_cal,
            n_mc,
            guarantee,
            seed,
            error_model: ErrorModel::FoldedStdNormal,
            policy: InfeasiblePolicy::Error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cal == 0 {
            return Err(Error::Empty("calibration set"));
        }
        if self.n_mc == 0 {
            return Err(Error::Empty("Monte Carlo realizations"));
        }
        self.guarantee.validate()
    }
}

/// Coverage and correction of every realization, in realization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub coverages: Vec<f64>,
    /// Infinite for unbounded predictors.
    pub corrections: Vec<f64>,
}

impl CoverageSample {
    pub fn len(&self) -> usize {
        self.coverages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coverages.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.coverages.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean();
        self.coverages
            .iter()
            .map(|c| (c - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    }

    /// Fraction of realizations with coverage strictly below `c`.
    pub fn fraction_below(&self, c: f64) -> f64 {
        self.coverages.iter().filter(|&&x| x < c).count() as f64 / self.len() as f64
    }

    /// Fraction of realizations with coverage at least `c`.
    pub fn fraction_at_least(&self, c: f64) -> f64 {
        1.0 - self.fraction_below(c)
    }
}

/// Runs `n_mc` independent calibrations. Realization `i` uses random stream
/// `i` of `seed`, so the result does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CoverageSample> {
    cfg.validate()?;
    let choice = resolve_level(cfg.n_cal, &cfg.guarantee)?;
    if let (LevelChoice::Infeasible { required_m }, InfeasiblePolicy::Error) = (choice, cfg.policy)
    {
        return Err(Error::Infeasible(format!(
            "guarantee needs order statistic {required_m} of only {} scores",
            cfg.n_cal
        )));
    }

    let outcomes = (0..cfg.n_mc)
        .into_par_iter()
        .map(|i| realization(cfg, choice, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let (coverages, corrections) = outcomes.into_iter().unzip();
    Ok(CoverageSample {
        coverages,
        corrections,
    })
}

fn realization(cfg: &ExperimentConfig, choice: LevelChoice, index: u64) -> Result<(f64, f64)> {
    let mut rng = StreamRng::new(cfg.seed, index);
    let draws = (0..cfg.n_cal)
        .map(|_| cfg.error_model.sample(rng.next_open01()))
        .collect::<Result<Vec<_>>>()?;
    let scores = ScoreSet::new(draws)?.into_sorted();
    let predictor = ConformalPredictor::from_level(&scores, choice, cfg.guarantee, cfg.policy)?;
    match predictor.correction {
        Some(q) => Ok((cfg.error_model.cdf(q)?, q)),
        None => Ok((1.0, f64::INFINITY)),
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of the sample and
/// the coverage law.
pub fn compare_to_law(sample: &CoverageSample, law: &CoverageLaw) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("coverage sample"));
    }
    let mut sorted = sample.coverages.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &c) in sorted.iter().enumerate() {
        let f = law.cdf(c.clamp(0.0, 1.0))?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of the coverages over [0, 1]; the last bin is
/// closed on the right.
pub fn histogram(sample: &CoverageSample, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    let mut counts = vec![0usize; bins];
    for &c in &sample.coverages {
        let idx = ((c.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 / bins as f64,
            hi: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect())
}
