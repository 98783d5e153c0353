//! Scalar numeric helpers shared across the crate.

/// log(Σ exp(x_i)) with max-subtraction for overflow safety.
///
/// Empty input and all-(-inf) input both yield -inf; a +inf entry yields +inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Two-term log-sum-exp.
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if !hi.is_finite() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 2, "sample variance needs at least two values");
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Quantile by linear interpolation of order statistics on a sorted slice
/// (h = (n-1)p in zero-based index space).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = lo.min(n - 2) + 1;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantile of an unsorted slice; copies and sorts.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    quantile_sorted(&v, p)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Abramowitz & Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Monte Carlo standard error of the pooled mean by batch means.
///
/// Each chain is split into floor(sqrt(n)) batches (remainder dropped); the
/// variance of the batch means absorbs within-chain autocorrelation.
pub fn mcse_batch_means(chains: &[Vec<f64>]) -> f64 {
    let mut batch_means = Vec::new();
    let mut total = 0usize;
    for chain in chains {
        let n = chain.len();
        let n_batches = (n as f64).sqrt().floor() as usize;
        if n_batches < 2 {
            continue;
        }
        let len = n / n_batches;
        for b in 0..n_batches {
            batch_means.push(mean(&chain[b * len..(b + 1) * len]));
            total += len;
        }
    }
    assert!(
        batch_means.len() >= 2,
        "batch-means MCSE needs at least two batches"
    );
    let _ = total;
    (sample_variance(&batch_means) / batch_means.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert!((log_sum_exp(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-14);
        // Values around -8000 (likelihood scale) must not underflow.
        let v = log_sum_exp(&[-8000.0, -8001.0]);
        assert!(v.is_finite());
        assert!((v - (-8000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-10);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn quantile_interpolates_order_statistics() {
        let draws: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert!((quantile(&draws, 0.025) - 25.975).abs() < 1e-9);
        assert!((quantile(&draws, 0.975) - 975.025).abs() < 1e-9);
        assert_eq!(quantile(&draws, 0.0), 1.0);
        assert_eq!(quantile(&draws, 1.0), 1000.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        // The rational approximation is good to ~1.5e-7 absolute.
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((std_normal_cdf(1.96) - 0.9750021).abs() < 1e-5);
        assert!((std_normal_cdf(-1.96) - 0.0249979).abs() < 1e-5);
    }

    #[test]
    fn mcse_iid_matches_naive_rate() {
        // For iid draws MCSE should be close to sd/sqrt(n).
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let chain: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let mcse = mcse_batch_means(std::slice::from_ref(&chain));
        let naive = (sample_variance(&chain) / chain.len() as f64).sqrt();
        assert!(mcse / naive > 0.6 && mcse / naive < 1.6, "{mcse} vs {naive}");
    }
}
