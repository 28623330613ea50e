//! Sample quantiles defined through order statistics: the level-`q` quantile
//! of `N` scores is the `m`-th smallest score with `m = ceil(N * q)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};

/// Relative tolerance under which `N * q` is treated as the nearest integer.
const INTEGER_SNAP: f64 = 1e-9;

/// A non-empty sample of finite conformity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    scores: Vec<f64>,
    sorted: bool,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("score set"));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::domain(format!(
                "score #{i} is not finite ({})",
                scores[i]
            )));
        }
        let sorted = scores.windows(2).all(|w| w[0] <= w[1]);
        Ok(Self { scores, sorted })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn into_sorted(mut self) -> Self {
        if !self.sorted {
            self.scores.sort_by(f64::total_cmp);
            self.sorted = true;
        }
        self
    }

    /// The `m`-th smallest score, 1-based.
    pub fn order_statistic(&self, m: usize) -> Result<f64> {
        if m == 0 || m > self.len() {
            return Err(Error::domain(format!(
                "order statistic {m} out of range for {} scores",
                self.len()
            )));
        }
        if self.sorted {
            Ok(self.scores[m - 1])
        } else {
            let mut sorted = self.scores.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(sorted[m - 1])
        }
    }
}

/// `ceil(x)`, except that values within a relative `1e-9` of an integer snap
/// to that integer. Products like `N * (k / N)` land a hair above or below
/// `k` in floating point and must still give `k`.
pub(crate) fn snapped_ceil(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= INTEGER_SNAP * nearest.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Order index `m = ceil(n * q)` of the level-`q` sample quantile.
pub fn order_index(n: usize, q: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    check_open_unit("quantile level", q)?;
    let m = snapped_ceil(n as f64 * q) as usize;
    Ok(m.clamp(1, n))
}

/// Sample quantile at level `q`: the `order_index(n, q)`-th smallest score.
pub fn sample_quantile(scores: &ScoreSet, q: f64) -> Result<f64> {
    let m = order_index(scores.len(), q)?;
    scores.order_statistic(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_index_examples() {
        assert_eq!(order_index(11, 0.9).unwrap(), 10);
        assert_eq!(order_index(100, 0.5).unwrap(), 50);
        // ceil(90.1) = 91
        assert_eq!(order_index(100, 0.901).unwrap(), 91);
        assert_eq!(order_index(1, 1e-12).unwrap(), 1);
    }

    #[test]
    fn order_index_domain() {
        assert!(order_index(10, 0.0).is_err());
        assert!(order_index(10, 1.0).is_err());
        assert!(order_index(10, f64::NAN).is_err());
        assert!(order_index(0, 0.5).is_err());
    }

    #[test]
    fn exact_integer_products_have_no_off_by_one() {
        for n in 1..=2000usize {
            for k in 1..n {
                let q = k as f64 / n as f64;
                assert_eq!(order_index(n, q).unwrap(), k, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn worked_quantile_example() {
        let s = ScoreSet::new(vec![1., 3., 3., 4., 5., 7., 8., 9., 9., 12., 15.]).unwrap();
        assert_eq!(sample_quantile(&s, 0.9).unwrap(), 12.0);
    }

    #[test]
    fn constant_sample() {
        let s = ScoreSet::new(vec![2.5; 17]).unwrap();
        for q in [0.01, 0.3, 0.5, 0.99] {
            assert_eq!(sample_quantile(&s, q).unwrap(), 2.5);
        }
    }

    #[test]
    fn median_matches_full_sort_oracle() {
        // xorshift keeps the test free of the crate's own RNG
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let draws: Vec<f64> = (0..1000)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = ScoreSet::new(draws).unwrap();
        assert_eq!(sample_quantile(&s, 0.5).unwrap(), sorted[500 - 1]);
    }

    #[test]
    fn score_set_validation() {
        assert_eq!(
            ScoreSet::new(vec![]).unwrap_err(),
            Error::Empty("score set")
        );
        assert!(ScoreSet::new(vec![1.0, f64::NAN]).is_err());
        assert!(ScoreSet::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(ScoreSet::new(vec![1.0, 2.0]).unwrap().is_sorted());
        assert!(!ScoreSet::new(vec![2.0, 1.0]).unwrap().is_sorted());
        assert!(ScoreSet::new(vec![2.0, 1.0])
            .unwrap()
            .into_sorted()
            .is_sorted());
    }

    proptest! {
        #[test]
        fn monotone_in_level(scores in prop::collection::vec(-1e3..1e3f64, 1..200),
                             q1 in 0.001..0.999f64, q2 in 0.001..0.999f64) {
            let s = ScoreSet::new(scores).unwrap();
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(sample_quantile(&s, lo).unwrap() <= sample_quantile(&s, hi).unwrap());
        }

        #[test]
        fn permutation_invariant(scores in prop::collection::vec(-1e3..1e3f64, 1..200),
                                 q in 0.001..0.999f64, rot in 0usize..200) {
            let s = ScoreSet::new(scores.clone()).unwrap();
            let mut permuted = scores;
            let k = rot % permuted.len();
            permuted.rotate_left(k);
            permuted.reverse();
            let p = ScoreSet::new(permuted).unwrap();
            prop_assert_eq!(sample_quantile(&s, q).unwrap(), sample_quantile(&p, q).unwrap());
        }
    }
}
