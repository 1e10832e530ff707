//! Monte Carlo summary statistics.

use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let se = if n > 1 {
            (m2 / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// Normal-approximation confidence interval at `z` standard errors.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }
}

/// Wilson score interval for `successes` out of `n` Bernoulli trials.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Ratio estimator `sum(y) / sum(x)` with its delta-method standard error.
pub fn ratio_estimate(x: &[f64], y: &[f64]) -> MeanEstimate {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, se: f64::NAN, n };
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let r = my / mx;
    if n < 2 {
        return MeanEstimate { mean: r, se: 0.0, n };
    }
    // Variance of the linearised residual y - r x.
    let var = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - r * a;
            e * e
        })
        .sum::<f64>()
        / (nf - 1.0);
    MeanEstimate {
        mean: r,
        se: (var / nf).sqrt() / mx.abs(),
        n,
    }
}

/// Two-sample z statistic; zero when both estimates are exact and agree.
pub fn z_score(a: &MeanEstimate, b: &MeanEstimate) -> f64 {
    let s = (a.se * a.se + b.se * b.se).sqrt();
    let d = a.mean - b.mean;
    if s == 0.0 {
        if d == 0.0 { 0.0 } else { f64::INFINITY * d.signum() }
    } else {
        d / s
    }
}

/// Pearson statistic over `counts` against `probs`, bins with tiny
/// expectation pooled into one.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * nf;
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    (stat, bins.saturating_sub(1))
}
