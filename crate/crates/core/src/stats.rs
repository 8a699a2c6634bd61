//! Small numerical helpers shared by the filter and the diagnostics.

/// Pairwise (tree) summation. The summation order depends only on the length,
/// so results are reproducible however the inputs were produced.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        s
    } else {
        let mid = x.len() / 2;
        pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
    }
}

/// `ln sum exp(x)`, `-inf` if every entry is `-inf` or the slice is empty.
pub fn log_sum_exp(x: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    scratch.clear();
    scratch.extend(x.iter().map(|v| (v - m).exp()));
    m + pairwise_sum(scratch).ln()
}

pub fn mean(x: &[f64]) -> f64 {
    pairwise_sum(x) / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Weighted quantiles with linear interpolation between the midpoints of
/// each sorted value's weight, `p_k = W_{k-1} + w_k / 2`. Weights must be
/// nonnegative with positive sum; they need not be normalised.
pub fn weighted_quantiles(values: &[f64], weights: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut mids = Vec::with_capacity(order.len());
    let mut cum = 0.0;
    for &i in &order {
        let w = weights[i] / total;
        mids.push(cum + 0.5 * w);
        cum += w;
    }
    probs
        .iter()
        .map(|&q| {
            let k = mids.partition_point(|&p| p < q);
            if k == 0 {
                values[order[0]]
            } else if k == order.len() {
                values[order[order.len() - 1]]
            } else {
                let (p0, p1) = (mids[k - 1], mids[k]);
                let (v0, v1) = (values[order[k - 1]], values[order[k]]);
                if p1 > p0 {
                    v0 + (v1 - v0) * (q - p0) / (p1 - p0)
                } else {
                    v1
                }
            }
        })
        .collect()
}

/// Weighted quantiles by inversion of the weighted CDF: the smallest value
/// whose cumulative weight reaches `q`. Suited to discrete outcomes.
pub fn weighted_quantiles_inverse(values: &[f64], weights: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(order.len());
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i] / total;
        cdf.push(cum);
    }
    probs
        .iter()
        .map(|&q| {
            let k = cdf.partition_point(|&c| c < q).min(order.len() - 1);
            values[order[k]]
        })
        .collect()
}
