//! Goodness-of-fit statistics and Monte Carlo error estimates.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::stats::mean;

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic p-value of the one-sample KS statistic `d` at sample size `n`,
/// with Stephens' small-sample adjustment.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Pearson chi-square statistic and its upper-tail p-value.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidParameter("chi-square needs at least two matching cells".into()));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Standard error of the mean of a correlated sequence by non-overlapping
/// batch means, using `floor(sqrt(n))` batches.
pub fn batch_means_se(x: &[f64]) -> Result<f64> {
    let batches = (x.len() as f64).sqrt().floor() as usize;
    batch_means_se_with(x, batches)
}

pub fn batch_means_se_with(x: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || x.len() < batches {
        return Err(Error::EmptyChain);
    }
    let size = x.len() / batches;
    let means: Vec<f64> = x[..size * batches].chunks(size).map(mean).collect();
    let m = mean(&means);
    let var = means.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (batches - 1) as f64;
    Ok((var / batches as f64).sqrt())
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
