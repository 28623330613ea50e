//! Calibration for the guarantee `P(C >= c_min) >= 1 - alpha`.
//!
//! Under the coverage law `C ~ Beta(m, n - m + 1)` the guarantee reads
//! `F_C(c_min; m) <= alpha`. The CDF is strictly decreasing in `m`, so the
//! smallest admissible order index is found by bisection on the continuous
//! relaxation `m_bar` followed by a ceiling.
//!
//! Planning works the other way round: fix the quantile level `q_tilde` and
//! search over the calibration size `n`. The integer curve
//! `g(n) = F_C(c_min; ceil(n q_tilde)) - alpha` is a sawtooth, but it is
//! sandwiched between two smooth curves evaluated at `m_bar = n q_tilde`:
//! `Beta(m_bar + 1, n - m_bar)` from below and `Beta(m_bar, n - m_bar + 1)`
//! from above. Their roots bracket the smallest workable `n`.

use serde::{Deserialize, Serialize};

use crate::coverage::CoverageLaw;
use crate::error::{check_open_unit, Error, Result};
use crate::quantiles::snapped_ceil;
use crate::special;

/// Tolerance on the continuous order index.
const M_BAR_TOL: f64 = 1e-9;

/// Default upper limit for the calibration-size search.
pub const DEFAULT_PLAN_CAP: usize = 10_000_000;

/// Outcome of [`solve_level`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Smallest order index meeting the guarantee.
    pub m: usize,
    /// Continuous root; `m == ceil(m_bar)`.
    pub m_bar: f64,
    /// Corrected quantile level `m / n_cal`.
    pub q_tilde: f64,
    /// `P(C >= c_min)` under the law of the chosen `m`.
    pub achieved_confidence: f64,
}

/// Smallest order index `m <= n_cal` with `P(C >= c_min) >= 1 - alpha`.
///
/// Returns [`Error::Infeasible`] when even `m = n_cal` falls short, in which
/// case a larger calibration set is needed (see [`min_calibration_size`]).
pub fn solve_level(n_cal: usize, c_min: f64, alpha: f64) -> Result<SolveResult> {
    if n_cal == 0 {
        return Err(Error::Empty("calibration set"));
    }
    check_open_unit("c_min", c_min)?;
    check_open_unit("alpha", alpha)?;

    let cdf_at = |m_bar: f64| -> Result<f64> { CoverageLaw::continuous(m_bar, n_cal)?.cdf(c_min) };

    let n = n_cal as f64;
    if cdf_at(n)? > alpha {
        return Err(Error::Infeasible(format!(
            "no order statistic of {n_cal} scores reaches coverage {c_min} with confidence {}",
            1.0 - alpha
        )));
    }

    // Invariant: cdf(lo) > alpha >= cdf(hi); the CDF tends to one as m_bar -> 0.
    let (mut lo, mut hi) = (0.0_f64, n);
    while hi - lo > M_BAR_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf_at(mid)? <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut m = (hi.ceil() as usize).max(1);
    // An integer strictly inside the final bracket has not been classified yet.
    if m >= 2 && (m - 1) as f64 > lo && cdf_at((m - 1) as f64)? <= alpha {
        m -= 1;
        hi = m as f64;
    }

    let law = CoverageLaw::new(m, n_cal)?;
    Ok(SolveResult {
        m,
        m_bar: hi,
        q_tilde: m as f64 / n,
        achieved_confidence: law.survival(c_min)?,
    })
}

/// Minimum coverage reached with confidence `1 - alpha` by the predictor using
/// the `m`-th of `n_cal` scores: the `alpha`-quantile of its coverage law.
pub fn c_min_of(n_cal: usize, m: usize, alpha: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    CoverageLaw::new(m, n_cal)?.ppf(alpha)
}

/// The planning curves at one calibration size, each already offset by the
/// target so that `<= 0` means the guarantee holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBounds {
    /// From `Beta(m_bar + 1, n - m_bar)`.
    pub lower: f64,
    /// From the realizable predictor, `m = ceil(m_bar)`.
    pub integer: f64,
    /// From `Beta(m_bar, n - m_bar + 1)`.
    pub upper: f64,
}

/// Evaluates the planning sandwich at `m_bar = n_cal * q_tilde`.
pub fn g_bounds(n_cal: usize, q_tilde: f64, c_min: f64, alpha: f64) -> Result<GBounds> {
    if n_cal == 0 {
        return Err(Error::Empty("calibration set"));
    }
    if !(q_tilde.is_finite() && q_tilde > 0.0 && q_tilde <= 1.0) {
        return Err(Error::domain(format!(
            "q_tilde must lie in (0, 1], got {q_tilde}"
        )));
    }
    check_open_unit("c_min", c_min)?;
    check_open_unit("alpha", alpha)?;

    let n = n_cal as f64;
    let m = (snapped_ceil(n * q_tilde) as usize).clamp(1, n_cal);
    // When n q_tilde is an integer up to rounding, m_bar is that integer.
    let m_bar = if (m as f64 - n * q_tilde).abs() < 1e-9 * n.max(1.0) {
        m as f64
    } else {
        n * q_tilde
    };

    let upper = special::reg_inc_beta(c_min, m_bar, n - m_bar + 1.0)?;
    let integer = special::reg_inc_beta(c_min, m as f64, (n_cal - m + 1) as f64)?;
    let lower = if n - m_bar > 0.0 {
        special::reg_inc_beta(c_min, m_bar + 1.0, n - m_bar)?
    } else {
        // Beta(n + 1, 0) is a point mass at one.
        0.0
    };
    Ok(GBounds {
        lower: lower - alpha,
        integer: integer - alpha,
        upper: upper - alpha,
    })
}

/// Options for [`min_calibration_size`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Largest accepted excess `m/n - q_tilde` of the realized level. `None`
    /// accepts one order-statistic step, `1/n`, which every ceiling model
    /// satisfies.
    pub slack: Option<f64>,
    /// Largest calibration size considered.
    pub cap: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            slack: None,
            cap: DEFAULT_PLAN_CAP,
        }
    }
}

/// Outcome of [`min_calibration_size`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Below this size the guarantee cannot be met near `q_tilde`.
    pub n_inf: usize,
    /// Above this size the guarantee is always met at `q_tilde`.
    pub n_sup: usize,
    /// Smallest size whose ceiling model meets the guarantee within the slack.
    pub n_min: Option<usize>,
    /// Order index used at `n_min`.
    pub m_at_min: Option<usize>,
    /// Realized quantile level `m_at_min / n_min`.
    pub q_achieved: Option<f64>,
}

/// Brackets the smallest calibration size for which a predictor built at
/// quantile level `q_tilde` reaches `c_min` with confidence `1 - alpha`.
pub fn min_calibration_size(
    c_min: f64,
    q_tilde: f64,
    alpha: f64,
    opts: PlanOptions,
) -> Result<PlanResult> {
    check_open_unit("c_min", c_min)?;
    check_open_unit("q_tilde", q_tilde)?;
    check_open_unit("alpha", alpha)?;
    if let Some(s) = opts.slack {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::domain(format!("slack must be positive, got {s}")));
        }
    }
    if opts.cap == 0 {
        return Err(Error::domain("planning cap must be at least 1"));
    }

    let bounds = |n: usize| g_bounds(n, q_tilde, c_min, alpha);

    let n_sup = first_true(opts.cap, |n| Ok(bounds(n)?.upper <= 0.0))?.ok_or_else(|| {
        Error::Infeasible(format!(
            "coverage {c_min} with confidence {} at level {q_tilde} is not reachable with up to {} samples",
            1.0 - alpha,
            opts.cap
        ))
    })?;
    let n_inf = first_true(n_sup, |n| Ok(bounds(n)?.lower <= 0.0))?.unwrap_or(n_sup);

    let mut found = None;
    for n in n_inf..=opts.cap {
        let m = (snapped_ceil(n as f64 * q_tilde) as usize).clamp(1, n);
        let excess = m as f64 / n as f64 - q_tilde;
        let slack = opts.slack.unwrap_or(1.0 / n as f64);
        if excess <= slack && bounds(n)?.integer <= 0.0 {
            found = Some((n, m));
            break;
        }
    }

    Ok(PlanResult {
        n_inf,
        n_sup,
        n_min: found.map(|(n, _)| n),
        m_at_min: found.map(|(_, m)| m),
        q_achieved: found.map(|(n, m)| m as f64 / n as f64),
    })
}

/// Smallest `n` in `1..=cap` satisfying a predicate that is false up to some
/// point and true afterwards. Doubling, then bisection.
fn first_true(cap: usize, mut pred: impl FnMut(usize) -> Result<bool>) -> Result<Option<usize>> {
    if pred(1)? {
        return Ok(Some(1));
    }
    let mut lo = 1; // pred(lo) is false
    let mut hi = 2;
    loop {
        if hi >= cap {
            hi = cap;
            if !pred(hi)? {
                return Ok(None);
            }
            break;
        }
        if pred(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
