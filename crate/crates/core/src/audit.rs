//! Coverage audits on a finite test set.
//!
//! A test point falls inside the prediction interval with probability equal
//! to the true coverage, so the hit count is binomial. The exact
//! Clopper–Pearson interval is used because coverages of interest sit close
//! to one, where normal approximations break down.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::special::{inv_reg_inc_beta, Tolerance};

/// One audited test point: the observed value and its closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub y_true: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AuditRow {
    pub fn new(y_true: f64, lo: f64, hi: f64) -> Self {
        Self { y_true, lo, hi }
    }

    pub fn is_hit(&self) -> bool {
        self.lo <= self.y_true && self.y_true <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub hits: usize,
    pub n_test: usize,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

/// Counts closed-interval hits; returns `(hits, n_test)`.
pub fn count_hits(rows: &[AuditRow]) -> Result<(usize, usize)> {
    if rows.is_empty() {
        return Err(Error::Empty("audit rows"));
    }
    Ok((rows.iter().filter(|r| r.is_hit()).count(), rows.len()))
}

/// Two-sided Clopper–Pearson interval for a binomial proportion.
pub fn clopper_pearson(hits: usize, n_test: usize, confidence: f64) -> Result<(f64, f64)> {
    if n_test == 0 {
        return Err(Error::Empty("test set"));
    }
    if hits > n_test {
        return Err(Error::domain(format!(
            "hits ({hits}) exceed n_test ({n_test})"
        )));
    }
    check_open_unit("confidence", confidence)?;

    let tail = (1.0 - confidence) / 2.0;
    let tol = Tolerance::default();
    let (k, n) = (hits as f64, n_test as f64);
    let low = if hits == 0 {
        0.0
    } else {
        inv_reg_inc_beta(tail, k, n - k + 1.0, tol)?
    };
    let high = if hits == n_test {
        1.0
    } else {
        inv_reg_inc_beta(1.0 - tail, k + 1.0, n - k, tol)?
    };
    Ok((low, high))
}

/// Hit count plus Clopper–Pearson interval for the true coverage.
pub fn audit(rows: &[AuditRow], confidence: f64) -> Result<CoverageAudit> {
    let (hits, n_test) = count_hits(rows)?;
    let (ci_low, ci_high) = clopper_pearson(hits, n_test, confidence)?;
    Ok(CoverageAudit {
        hits,
        n_test,
        point_estimate: hits as f64 / n_test as f64,
        ci_low,
        ci_high,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::reg_inc_beta;
    use proptest::prelude::*;

    #[test]
    fn hits_examples() {
        let inside: Vec<_> = (0..5)
            .map(|i| AuditRow::new(i as f64, -1.0, 10.0))
            .collect();
        assert_eq!(count_hits(&inside).unwrap(), (5, 5));
        assert_eq!(count_hits(&[AuditRow::new(2.0, 1.0, 2.0)]).unwrap(), (1, 1));
        assert_eq!(count_hits(&[AuditRow::new(1.0, 1.0, 2.0)]).unwrap(), (1, 1));
        assert_eq!(
            count_hits(&[AuditRow::new(2.0 + 1e-12, 1.0, 2.0)]).unwrap(),
            (0, 1)
        );
        assert!(count_hits(&[]).is_err());
    }

    #[test]
    fn hits_match_recount() {
        let rows: Vec<_> = (0..500)
            .map(|i| {
                let y = ((i * 7919) % 1000) as f64 / 100.0;
                AuditRow::new(
                    y,
                    ((i * 31) % 700) as f64 / 100.0,
                    ((i * 17) % 1000) as f64 / 100.0,
                )
            })
            .collect();
        let mut expected = 0;
        for r in &rows {
            let below = r.y_true.partial_cmp(&r.lo) == Some(std::cmp::Ordering::Less);
            let above = r.y_true.partial_cmp(&r.hi) == Some(std::cmp::Ordering::Greater);
            if !below && !above {
                expected += 1;
            }
        }
        assert_eq!(count_hits(&rows).unwrap(), (expected, 500));
    }

    #[test]
    fn boundary_conventions() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1.0);
        let (lo, hi) = clopper_pearson(10, 10, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.0 && lo < 1.0);
        // (alpha/2)^(1/n) for the all-hits lower limit
        assert!((lo - 0.025_f64.powf(0.1)).abs() < 1e-10);
    }

    #[test]
    fn interval_matches_bisection_oracle() {
        let bisect = |p: f64, a: f64, b: f64| {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if reg_inc_beta(mid, a, b).unwrap() < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let (lo, hi) = clopper_pearson(95, 100, 0.95).unwrap();
        assert!((lo - bisect(0.025, 95.0, 6.0)).abs() < 1e-10);
        assert!((hi - bisect(0.975, 96.0, 5.0)).abs() < 1e-10);
        assert!(lo < 0.95 && 0.95 < hi);
    }

    #[test]
    fn invalid_counts() {
        assert!(clopper_pearson(11, 10, 0.95).is_err());
        assert!(clopper_pearson(0, 0, 0.95).is_err());
        assert!(clopper_pearson(5, 10, 1.0).is_err());
    }

    #[test]
    fn width_shrinks_with_n() {
        let mut prev = 1.0;
        for n in [20usize, 40, 100, 200, 1000, 5000] {
            let (lo, hi) = clopper_pearson(n * 9 / 10, n, 0.95).unwrap();
            assert!(hi - lo <= prev);
            prev = hi - lo;
        }
    }

    #[test]
    fn audit_summary() {
        let rows = vec![
            AuditRow::new(0.0, -1.0, 1.0),
            AuditRow::new(2.0, -1.0, 1.0),
            AuditRow::new(0.5, 0.0, 1.0),
            AuditRow::new(1.0, 0.0, 1.0),
        ];
        let a = audit(&rows, 0.9).unwrap();
        assert_eq!((a.hits, a.n_test), (3, 4));
        assert_eq!(a.point_estimate, 0.75);
        assert!(a.ci_low <= a.point_estimate && a.point_estimate <= a.ci_high);
    }

    proptest! {
        #[test]
        fn mirror_symmetry(n in 1usize..400, frac in 0.0..=1.0f64) {
            let k = ((n as f64) * frac).round() as usize;
            let (lo, hi) = clopper_pearson(k, n, 0.95).unwrap();
            let (mlo, mhi) = clopper_pearson(n - k, n, 0.95).unwrap();
            prop_assert!((lo - (1.0 - mhi)).abs() < 1e-9);
            prop_assert!((hi - (1.0 - mlo)).abs() < 1e-9);
        }

        #[test]
        fn contains_point_estimate(n in 1usize..400, frac in 0.0..=1.0f64, conf in 0.5..0.999f64) {
            let k = ((n as f64) * frac).round() as usize;
            let (lo, hi) = clopper_pearson(k, n, conf).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p && p <= hi);
        }
    }
}
