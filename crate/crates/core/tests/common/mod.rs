//! Independent reference computations for the integration and acceptance
//! tests. Only `std` is used here so none of the library's numerics leak in.

#![allow(dead_code)]

/// SplitMix64, independent of the generator used by the library.
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `I_x(a, b)` for `a, b >= 1` by composite Gauss–Legendre quadrature of
/// the unnormalized density, divided by the same quadrature over [0, 1].
/// Panels are graded geometrically toward both endpoints and packed around
/// the mode.
pub fn reg_inc_beta_quad(x: f64, a: f64, b: f64) -> f64 {
    assert!(a >= 1.0 && b >= 1.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mode = if a + b > 2.0 {
        (a - 1.0) / (a + b - 2.0)
    } else {
        0.5
    };
    let log_density = |t: f64| (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p();
    let peak = if mode > 0.0 && mode < 1.0 {
        log_density(mode)
    } else {
        0.0
    };
    let density = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        (log_density(t) - peak).exp()
    };

    let mean = a / (a + b);
    let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    let lo = (mean - 60.0 * sd).max(0.0);
    let hi = (mean + 60.0 * sd).min(1.0);
    let mut edges = vec![0.0, 1.0, x, lo, hi, mode.clamp(0.0, 1.0)];
    for k in 1..=60 {
        let h = 0.5f64.powi(k);
        edges.push(h);
        edges.push(1.0 - h);
    }
    let panels = 600;
    for i in 0..=panels {
        edges.push(lo + (hi - lo) * i as f64 / panels as f64);
    }
    edges.retain(|e| (0.0..=1.0).contains(e));
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let rule = gauss_legendre(20);
    let (mut below, mut total) = (0.0, 0.0);
    for w in edges.windows(2) {
        let (l, r) = (w[0], w[1]);
        let half = 0.5 * (r - l);
        let mid = 0.5 * (r + l);
        let piece: f64 = rule
            .iter()
            .map(|(t, wt)| wt * density(mid + half * t))
            .sum::<f64>()
            * half;
        total += piece;
        if r <= x {
            below += piece;
        }
    }
    below / total
}

/// `ln k!` for `k = 0..=n` by running sums.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `P(Binomial(n, c) >= m)`, which equals the CDF at `c` of the `m`-th order
/// statistic of `n` uniforms.
pub fn order_stat_cdf(n: usize, m: usize, c: f64, lf: &[f64]) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    let (lc, l1c) = (c.ln(), (-c).ln_1p());
    (m..=n)
        .map(|j| (lf[n] - lf[j] - lf[n - j] + j as f64 * lc + (n - j) as f64 * l1c).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Smallest `m` in `1..=n` with `P(C_m >= c_min) >= 1 - alpha`, by scanning.
pub fn scan_min_m(n: usize, c_min: f64, alpha: f64, lf: &[f64]) -> Option<usize> {
    (1..=n).find(|&m| order_stat_cdf(n, m, c_min, lf) <= alpha)
}

/// Kolmogorov–Smirnov distance of a sample to a CDF.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Critical value of the KS statistic at the 1% level.
pub fn ks_critical_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// `m`-th smallest of `n` uniforms, drawn `reps` times.
pub fn uniform_order_stats(n: usize, m: usize, reps: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix::new(seed);
    let mut buf = vec![0.0; n];
    (0..reps)
        .map(|_| {
            for v in buf.iter_mut() {
                *v = rng.uniform();
            }
            buf.select_nth_unstable_by(m - 1, f64::total_cmp);
            buf[m - 1]
        })
        .collect()
}

/// Binomial draw by summing Bernoulli trials.
pub fn binomial(n: usize, p: f64, rng: &mut SplitMix) -> usize {
    (0..n).filter(|_| rng.uniform() < p).count()
}
