//! The coverage law of an order-statistic predictor.
//!
//! A predictor built from the `m`-th smallest of `n_cal` exchangeable scores
//! has coverage distributed as `Beta(m, n_cal - m + 1)` when measured on an
//! infinite test set. Everything here is closed-form in that law.
//!
//! The marginal-gap functions work on exact rationals: whether `(N+1) C` is
//! an integer decides which branch of the gap formula applies, and that test
//! is not reliable in floating point.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::special::{self, Tolerance};

/// Exact rational used for level arithmetic.
pub type Rational = Ratio<i128>;

/// `Beta(m, n_cal - m + 1)`, with `m` either an integer order index or its
/// continuous relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageLaw {
    m: f64,
    n_cal: usize,
}

impl CoverageLaw {
    /// Law of the predictor using the `m`-th order statistic.
    pub fn new(m: usize, n_cal: usize) -> Result<Self> {
        if m == 0 || m > n_cal {
            return Err(Error::domain(format!(
                "order index must satisfy 1 <= m <= n_cal, got m={m}, n_cal={n_cal}"
            )));
        }
        Ok(Self { m: m as f64, n_cal })
    }

    /// Law with a real-valued order index `0 < m_bar <= n_cal`.
    pub fn continuous(m_bar: f64, n_cal: usize) -> Result<Self> {
        if !(m_bar.is_finite() && m_bar > 0.0 && m_bar <= n_cal as f64) {
            return Err(Error::domain(format!(
                "continuous order index must satisfy 0 < m <= n_cal, got m={m_bar}, n_cal={n_cal}"
            )));
        }
        Ok(Self { m: m_bar, n_cal })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n_cal(&self) -> usize {
        self.n_cal
    }

    /// Beta shape parameters `(m, n_cal - m + 1)`.
    pub fn shape(&self) -> (f64, f64) {
        (self.m, self.n_cal as f64 - self.m + 1.0)
    }

    /// `P(C <= c)`.
    pub fn cdf(&self, c: f64) -> Result<f64> {
        let (a, b) = self.shape();
        special::reg_inc_beta(c, a, b)
    }

    /// `P(C > c)`, computed without cancellation.
    pub fn survival(&self, c: f64) -> Result<f64> {
        let (a, b) = self.shape();
        special::reg_inc_beta_complement(c, a, b)
    }

    pub fn ppf(&self, p: f64) -> Result<f64> {
        self.ppf_with(p, Tolerance::default())
    }

    pub fn ppf_with(&self, p: f64, tol: Tolerance) -> Result<f64> {
        let (a, b) = self.shape();
        special::inv_reg_inc_beta(p, a, b, tol)
    }

    /// Marginal coverage `E(C) = m / (n_cal + 1)`.
    pub fn mean(&self) -> f64 {
        self.m / (self.n_cal as f64 + 1.0)
    }

    pub fn variance(&self) -> f64 {
        let (a, b) = self.shape();
        a * b / ((a + b).powi(2) * (a + b + 1.0))
    }
}

/// Reads a level as the short decimal it was most likely written as, so that
/// `0.9` means exactly `9/10`. Falls back to the exact binary value.
pub fn level_as_ratio(level: f64) -> Result<Rational> {
    check_open_unit("level", level)?;
    let mut den: i128 = 1;
    for _ in 0..=18 {
        let num = (level * den as f64).round();
        if num / den as f64 == level {
            return Ok(Rational::new(num as i128, den));
        }
        den *= 10;
    }
    // level = mantissa * 2^exp exactly
    let bits = level.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let shift = 1075 - exp;
    if exp == 0 || shift > 120 {
        return Err(Error::domain(format!(
            "level {level} is too small for exact rational arithmetic"
        )));
    }
    Ok(Rational::new(mantissa as i128, 1i128 << shift))
}

fn check_level_ratio(c: Rational) -> Result<()> {
    if c > Rational::from_integer(0) && c < Rational::from_integer(1) {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {c}")))
    }
}

/// `ceil(k * c)` in exact arithmetic.
pub(crate) fn ceil_scaled(k: usize, c: Rational) -> i128 {
    (c * Rational::from_integer(k as i128)).ceil().to_integer()
}

/// Order index `ceil((n_cal + 1) c_nom)` of the classic conformal correction.
pub fn classic_order_index(n_cal: usize, c_nom: Rational) -> Result<usize> {
    check_level_ratio(c_nom)?;
    Ok(ceil_scaled(n_cal + 1, c_nom) as usize)
}

/// `E(C) - C_nom` for the uncorrected predictor with `m = ceil(N C_nom)`,
/// in exact arithmetic.
///
/// Two cases: `-C_nom / (N+1)` when `N C_nom` is an integer, otherwise
/// `(1 - {N C_nom} - C_nom) / (N+1)` with `{.}` the fractional part.
pub fn marginal_gap_simple_exact(n_cal: usize, c_nom: Rational) -> Result<Rational> {
    if n_cal == 0 {
        return Err(Error::Empty("calibration set"));
    }
    check_level_ratio(c_nom)?;
    let one = Rational::from_integer(1);
    let denom = Rational::from_integer(n_cal as i128 + 1);
    let scaled = c_nom * Rational::from_integer(n_cal as i128);
    Ok(if scaled.is_integer() {
        -c_nom / denom
    } else {
        (one - scaled.fract() - c_nom) / denom
    })
}

/// Floating-point view of [`marginal_gap_simple_exact`].
pub fn marginal_gap_simple(n_cal: usize, c_nom: f64) -> Result<f64> {
    marginal_gap_simple_exact(n_cal, level_as_ratio(c_nom)?).map(to_f64)
}

/// `E(C) - C_nom` for the classic conformal predictor with
/// `m = ceil((N+1) C_nom)`, in exact arithmetic.
///
/// Zero when `(N+1) C_nom` is an integer, otherwise
/// `(1 - {(N+1) C_nom}) / (N+1)`. Infeasible when `m > N`.
pub fn marginal_gap_classic_exact(n_cal: usize, c_nom: Rational) -> Result<Rational> {
    if n_cal == 0 {
        return Err(Error::Empty("calibration set"));
    }
    let m = classic_order_index(n_cal, c_nom)?;
    if m > n_cal {
        return Err(Error::Infeasible(format!(
            "classic correction needs order statistic {m} of only {n_cal} scores"
        )));
    }
    let one = Rational::from_integer(1);
    let denom = Rational::from_integer(n_cal as i128 + 1);
    let scaled = c_nom * denom;
    Ok(if scaled.is_integer() {
        Rational::from_integer(0)
    } else {
        (one - scaled.fract()) / denom
    })
}

/// Floating-point view of [`marginal_gap_classic_exact`].
pub fn marginal_gap_classic(n_cal: usize, c_nom: f64) -> Result<f64> {
    marginal_gap_classic_exact(n_cal, level_as_ratio(c_nom)?).map(to_f64)
}

pub(crate) fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn level_parsing_recovers_decimals() {
        assert_eq!(level_as_ratio(0.9).unwrap(), r(9, 10));
        assert_eq!(level_as_ratio(0.905).unwrap(), r(181, 200));
        assert_eq!(level_as_ratio(0.5).unwrap(), r(1, 2));
        assert_eq!(
            level_as_ratio(0.123456789).unwrap(),
            r(123456789, 1_000_000_000)
        );
        let third = level_as_ratio(1.0 / 3.0).unwrap();
        assert_eq!(to_f64(third), 1.0 / 3.0);
        assert!(level_as_ratio(1.0).is_err());
        assert!(level_as_ratio(0.0).is_err());
    }

    #[test]
    fn law_validation() {
        assert!(CoverageLaw::new(0, 10).is_err());
        assert!(CoverageLaw::new(11, 10).is_err());
        assert!(CoverageLaw::new(10, 10).is_ok());
        assert!(CoverageLaw::continuous(0.0, 10).is_err());
        assert!(CoverageLaw::continuous(10.5, 10).is_err());
        assert!(CoverageLaw::continuous(0.3, 10).is_ok());
    }

    #[test]
    fn cdf_examples() {
        let uniform = CoverageLaw::new(1, 1).unwrap();
        assert!((uniform.cdf(0.5).unwrap() - 0.5).abs() < 1e-15);

        let classic = CoverageLaw::new(91, 100).unwrap();
        let below_nominal = classic.cdf(0.9).unwrap();
        let below_086 = classic.cdf(0.86).unwrap();
        assert!((below_nominal - 0.46).abs() <= 0.02, "{below_nominal}");
        assert!((below_086 - 0.10).abs() <= 0.02, "{below_086}");
        assert_eq!(
            below_nominal,
            special::reg_inc_beta(0.9, 91.0, 10.0).unwrap()
        );
        assert!(classic.cdf(1.5).is_err());
    }

    #[test]
    fn ppf_examples() {
        let uniform = CoverageLaw::new(1, 1).unwrap();
        assert!((uniform.ppf(0.3).unwrap() - 0.3).abs() < 1e-12);

        let classic = CoverageLaw::new(91, 100).unwrap();
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if classic.cdf(mid).unwrap() < 0.05 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c_min = classic.ppf(0.05).unwrap();
        assert!((c_min - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!(c_min < 0.86);
    }

    #[test]
    fn mean_examples() {
        let classic = CoverageLaw::new(91, 100).unwrap();
        assert!((classic.mean() - 91.0 / 101.0).abs() < 1e-16);
        assert_eq!(CoverageLaw::new(1, 1).unwrap().mean(), 0.5);
    }

    #[test]
    fn mean_matches_uniform_order_statistic_simulation() {
        let (n, m, reps) = (20usize, 18usize, 20_000usize);
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        let draws: Vec<f64> = (0..reps)
            .map(|_| {
                let mut u: Vec<f64> = (0..n).map(|_| next()).collect();
                u.sort_by(|a, b| a.partial_cmp(b).unwrap());
                u[m - 1]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let law = CoverageLaw::new(m, n).unwrap();
        let se = (law.variance() / reps as f64).sqrt();
        assert!(
            (mean - law.mean()).abs() <= 3.0 * se,
            "{mean} vs {}",
            law.mean()
        );
    }

    #[test]
    fn simple_gap_examples() {
        assert_eq!(marginal_gap_simple_exact(10, r(1, 2)).unwrap(), r(-1, 22));
        assert_eq!(
            marginal_gap_simple_exact(100, r(9, 10)).unwrap(),
            r(90, 101) - r(9, 10)
        );
        let general = marginal_gap_simple_exact(100, r(181, 200)).unwrap();
        assert_eq!(general, r(91, 101) - r(181, 200));
        let law = CoverageLaw::new(91, 100).unwrap();
        assert!((marginal_gap_simple(100, 0.905).unwrap() - (law.mean() - 0.905)).abs() < 1e-15);
    }

    #[test]
    fn classic_gap_examples() {
        assert_eq!(marginal_gap_classic_exact(10, r(1, 2)).unwrap(), r(1, 22));
        assert_eq!(marginal_gap_classic_exact(9, r(1, 2)).unwrap(), r(0, 1));
        assert_eq!(
            marginal_gap_classic_exact(100, r(9, 10)).unwrap(),
            r(91, 101) - r(9, 10)
        );
        assert!((marginal_gap_classic(100, 0.9).unwrap() - 0.000_990_099).abs() < 1e-9);
        assert!(marginal_gap_classic(10, 0.99).unwrap_err().is_infeasible());
    }

    #[test]
    fn gap_bounds_exhaustive() {
        for n in 1..=500usize {
            let bound = r(1, n as i128 + 1);
            for k in 1..=99 {
                let c = r(k, 100);
                let simple = marginal_gap_simple_exact(n, c).unwrap();
                assert!(-bound <= simple && simple <= bound, "n={n} c={c}");
                // direct evaluation with an independently computed index
                let m_simple = (c * r(n as i128, 1)).ceil();
                assert_eq!(simple, m_simple / r(n as i128 + 1, 1) - c);
                match marginal_gap_classic_exact(n, c) {
                    Ok(gap) => {
                        assert!(r(0, 1) <= gap && gap <= bound, "n={n} c={c}");
                        let m = (c * r(n as i128 + 1, 1)).ceil();
                        assert_eq!(gap, m / r(n as i128 + 1, 1) - c);
                    }
                    Err(e) => {
                        assert!(e.is_infeasible());
                        assert!((c * r(n as i128 + 1, 1)).ceil() > r(n as i128, 1));
                    }
                }
            }
        }
    }

    #[test]
    fn cdf_strictly_decreasing_in_m() {
        for &n in &[5usize, 50, 400] {
            for &c in &[0.2, 0.5, 0.9, 0.97] {
                let mut prev = 2.0;
                for m in 1..=n {
                    let v = CoverageLaw::new(m, n).unwrap().cdf(c).unwrap();
                    // saturated tails may tie within rounding
                    let saturated = !(1e-12..=1.0 - 1e-12).contains(&prev);
                    assert!(
                        v < prev || (saturated && v <= prev + 1e-15),
                        "n={n} c={c} m={m}"
                    );
                    prev = v;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ppf_round_trip(m in 1usize..500, extra in 0usize..500, p in 1e-6..(1.0 - 1e-6)) {
            let law = CoverageLaw::new(m, m + extra).unwrap();
            let c = law.ppf(p).unwrap();
            prop_assert!((law.cdf(c).unwrap() - p).abs() <= 1e-9);
        }
    }
}
