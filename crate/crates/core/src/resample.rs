//! Resampling schemes.
//!
//! All three schemes place `N` points on `[0, N)` and hand each point to the
//! particle whose slice of the scaled cumulative weights `N * W_i` contains
//! it. They differ only in how the points are drawn: sorted uniforms
//! (multinomial), one uniform per stratum (stratified) or one shared offset
//! (systematic). Every scheme runs in O(N).

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on the sum of normalised weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
    Stratified,
}

impl fmt::Display for Resampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resampling::Multinomial => "multinomial",
            Resampling::Systematic => "systematic",
            Resampling::Stratified => "stratified",
        })
    }
}

impl FromStr for Resampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(Resampling::Multinomial),
            "systematic" => Ok(Resampling::Systematic),
            "stratified" => Ok(Resampling::Stratified),
            other => Err(Error::InvalidConfig(format!("unknown resampling scheme {other:?}"))),
        }
    }
}

/// Fails unless the weights are finite, nonnegative and sum to 1.
pub fn check_weights(weights: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::WeightSumInvalid(w));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSumInvalid(sum));
    }
    Ok(())
}

/// Fills `out` with `N` ancestor indices drawn under `scheme`.
pub fn resample_indices<R: Rng + ?Sized>(
    scheme: Resampling,
    weights: &[f64],
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    check_weights(weights)?;
    resample_normalised(scheme, weights, rng, out);
    Ok(())
}

/// `resample_indices` for weights already known to be normalised.
pub(crate) fn resample_normalised<R: Rng + ?Sized>(scheme: Resampling, weights: &[f64], rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    let n = weights.len();
    if n == 0 {
        return;
    }
    match scheme {
        Resampling::Systematic => {
            let u: f64 = rng.random();
            assign(weights, (0..n).map(|k| k as f64 + u), out);
        }
        Resampling::Stratified => {
            assign(weights, (0..n).map(|k| k as f64 + rng.random::<f64>()), out);
        }
        Resampling::Multinomial => {
            // Sorted uniforms as normalised partial sums of N + 1 exponentials.
            let mut partial = Vec::with_capacity(n);
            let mut s = 0.0;
            for _ in 0..n {
                s += exp1(rng);
                partial.push(s);
            }
            let total = s + exp1(rng);
            let scale = n as f64 / total;
            assign(weights, partial.iter().map(|p| p * scale), out);
        }
    }
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Maps nondecreasing points in `[0, N)` to particle indices. Zero-weight
/// particles are never chosen, even under rounding at the top end.
fn assign(weights: &[f64], points: impl Iterator<Item = f64>, out: &mut Vec<usize>) {
    let n = weights.len() as f64;
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let mut i = 0;
    while weights[i] == 0.0 && i < last {
        i += 1;
    }
    let mut edge = n * weights[..=i].iter().sum::<f64>();
    for p in points {
        while p >= edge && i < last {
            i += 1;
            edge += n * weights[i];
        }
        out.push(i);
    }
}

fn gather<T: Clone>(particles: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| particles[i].clone()).collect()
}

fn resample<T: Clone, R: Rng + ?Sized>(
    scheme: Resampling,
    particles: &[T],
    weights: &[f64],
    rng: &mut R,
) -> Result<Vec<T>> {
    if particles.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: particles.len(),
            got: weights.len(),
        });
    }
    let mut idx = Vec::with_capacity(weights.len());
    resample_indices(scheme, weights, rng, &mut idx)?;
    Ok(gather(particles, &idx))
}

/// `N` independent draws with replacement, particle `i` with probability `w_i`.
pub fn resample_multinomial<T: Clone, R: Rng + ?Sized>(particles: &[T], weights: &[f64], rng: &mut R) -> Result<Vec<T>> {
    resample(Resampling::Multinomial, particles, weights, rng)
}

/// One uniform offset `u` shared by the points `(k + u) / N`.
pub fn resample_systematic<T: Clone, R: Rng + ?Sized>(particles: &[T], weights: &[f64], rng: &mut R) -> Result<Vec<T>> {
    resample(Resampling::Systematic, particles, weights, rng)
}

/// One independent uniform point in each stratum `[k/N, (k+1)/N)`.
pub fn resample_stratified<T: Clone, R: Rng + ?Sized>(particles: &[T], weights: &[f64], rng: &mut R) -> Result<Vec<T>> {
    resample(Resampling::Stratified, particles, weights, rng)
}

/// Offspring count per particle for a list of ancestor indices.
pub fn offspring_counts(ancestors: &[usize], n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for &a in ancestors {
        c[a] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    const SCHEMES: [Resampling; 3] = [Resampling::Multinomial, Resampling::Systematic, Resampling::Stratified];

    fn counts(scheme: Resampling, w: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut idx = Vec::new();
        resample_indices(scheme, w, rng, &mut idx).unwrap();
        assert_eq!(idx.len(), w.len());
        offspring_counts(&idx, w.len())
    }

    #[test]
    fn degenerate_weights_copy_one_particle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        for s in SCHEMES {
            assert_eq!(counts(s, &w, &mut rng)[0], 8);
        }
        let mut w = vec![0.0; 8];
        w[7] = 1.0;
        for s in SCHEMES {
            assert_eq!(counts(s, &w, &mut rng)[7], 8);
        }
        let particles: Vec<i32> = (0..8).collect();
        assert_eq!(resample_systematic(&particles, &w, &mut rng).unwrap(), vec![7; 8]);
    }

    #[test]
    fn uniform_weights_systematic_and_stratified_copy_each_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 3, 10, 1000] {
            let w = vec![1.0 / n as f64; n];
            for _ in 0..20 {
                assert!(counts(Resampling::Systematic, &w, &mut rng).iter().all(|&c| c == 1));
                assert!(counts(Resampling::Stratified, &w, &mut rng).iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn exact_multiples_give_fixed_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = vec![0.0; 10];
        w[..3].copy_from_slice(&[0.5, 0.3, 0.2]);
        for _ in 0..1000 {
            assert_eq!(&counts(Resampling::Systematic, &w, &mut rng)[..3], &[5, 3, 2]);
        }
    }

    #[test]
    fn invalid_weights_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = Vec::new();
        for w in [vec![0.5, 0.4], vec![1.5, -0.5], vec![f64::NAN, 1.0]] {
            for s in SCHEMES {
                assert!(matches!(
                    resample_indices(s, &w, &mut rng, &mut out),
                    Err(Error::WeightSumInvalid(_))
                ));
            }
        }
        assert!(matches!(
            resample_multinomial(&[1, 2], &[1.0], &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn systematic_counts_within_floor_and_ceil() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let n = rng.random_range(1..60);
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|r| r / s).collect();
            let c = counts(Resampling::Systematic, &w, &mut rng);
            for (ci, wi) in c.iter().zip(&w) {
                let nw = n as f64 * wi;
                assert!(*ci as f64 >= nw.floor() && *ci as f64 <= nw.ceil(), "{ci} vs {nw}");
            }
            let c = counts(Resampling::Stratified, &w, &mut rng);
            for (ci, wi) in c.iter().zip(&w) {
                let nw = n as f64 * wi;
                assert!(*ci as f64 >= nw.floor() - 1.0 && *ci as f64 <= nw.ceil() + 1.0);
            }
        }
    }

    #[test]
    fn multinomial_uniform_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10;
        let w = vec![0.1; n];
        let reps = 10_000;
        let mut total = vec![0usize; n];
        for _ in 0..reps {
            for (t, c) in total.iter_mut().zip(counts(Resampling::Multinomial, &w, &mut rng)) {
                *t += c;
            }
        }
        let expected = reps as f64;
        let stat: f64 = total.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let crit = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < crit, "{stat} >= {crit}");
    }

    #[test]
    fn output_is_a_sub_multiset_of_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = [0.0, 0.25, 0.0, 0.75, 0.0];
        for s in SCHEMES {
            for _ in 0..500 {
                let c = counts(s, &w, &mut rng);
                assert_eq!(c[0] + c[2] + c[4], 0);
            }
        }
    }

    #[test]
    fn weighted_mean_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs = [-2.0, 0.5, 1.0, 3.0, 7.0];
        let w = [0.1, 0.35, 0.05, 0.3, 0.2];
        let target: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum();
        for s in SCHEMES {
            let reps = 10_000;
            let means: Vec<f64> = (0..reps)
                .map(|_| {
                    let out = match s {
                        Resampling::Multinomial => resample_multinomial(&xs, &w, &mut rng),
                        Resampling::Systematic => resample_systematic(&xs, &w, &mut rng),
                        Resampling::Stratified => resample_stratified(&xs, &w, &mut rng),
                    }
                    .unwrap();
                    out.iter().sum::<f64>() / out.len() as f64
                })
                .collect();
            let m = means.iter().sum::<f64>() / reps as f64;
            let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt().max(1e-12);
            assert!((m - target).abs() < 4.0 * se + 1e-12, "{s}: {m} vs {target} (se {se})");
        }
    }

    #[test]
    fn names_round_trip() {
        for s in SCHEMES {
            assert_eq!(s.to_string().parse::<Resampling>().unwrap(), s);
        }
        assert!("bogus".parse::<Resampling>().is_err());
    }
}
