//! Weighted correlation of posterior state-probability series with each
//! other and with external covariate time series, plus the helper transforms
//! that turn daily external measurements into weekly series.

use crate::error::{Error, Result};
use crate::posterior::StateSeries;
use crate::stats::median;

/// Weighted Pearson correlation with weighted means and covariances.
pub fn weighted_corr(a: &[f64], b: &[f64], w: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != w.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {} vs {} weights",
            a.len(),
            b.len(),
            w.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("series are empty".into()));
    }
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("weights must not all be zero".into()));
    }
    let mean_a: f64 = a.iter().zip(w).map(|(x, wt)| x * wt).sum::<f64>() / total;
    let mean_b: f64 = b.iter().zip(w).map(|(x, wt)| x * wt).sum::<f64>() / total;
    let mut cov_ab = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        cov_ab += w[i] * da * db;
        var_a += w[i] * da * da;
        var_b += w[i] * db * db;
    }
    if var_a <= 0.0 {
        return Err(Error::UndefinedCorrelation("first".into()));
    }
    if var_b <= 0.0 {
        return Err(Error::UndefinedCorrelation("second".into()));
    }
    Ok(cov_ab / (var_a * var_b).sqrt())
}

/// Default weights for a state-probability series: inverse posterior
/// standard deviations capped at their median, `w_t = min(1/std_t,
/// median(1/std))`. Zero-deviation periods receive the capped median weight.
pub fn state_series_weights(series: &StateSeries) -> Result<Vec<f64>> {
    if series.stds.is_empty() {
        return Err(Error::InvalidInput("state series is empty".into()));
    }
    let inv: Vec<f64> = series
        .stds
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s } else { f64::INFINITY })
        .collect();
    let finite: Vec<f64> = inv.iter().cloned().filter(|v| v.is_finite()).collect();
    if finite.len() < inv.len() / 2 + 1 {
        return Err(Error::InvalidInput(
            "more than half the periods have zero posterior deviation; weights degenerate".into(),
        ));
    }
    let med = median(&finite);
    Ok(inv.into_iter().map(|v| v.min(med)).collect())
}

/// One named series with optional per-period precision weights.
#[derive(Debug, Clone)]
pub struct NamedSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl NamedSeries {
    pub fn plain(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values, weights: None }
    }

    pub fn from_state_series(name: impl Into<String>, series: &StateSeries) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            values: series.probs.clone(),
            weights: Some(state_series_weights(series)?),
        })
    }
}

/// Labeled symmetric correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    /// Row-major k x k values; diagonal exactly 1.
    pub values: Vec<f64>,
}

impl CorrMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }
}

/// Pairwise weighted correlations. The pair weight is the elementwise
/// product of the series' weights (absent weights count as uniform), so a
/// pair of plain series reduces to the ordinary Pearson coefficient. An
/// optional period mask restricts the computation to a season.
pub fn corr_matrix(series: &[NamedSeries], mask: Option<&[bool]>) -> Result<CorrMatrix> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no series given".into()));
    }
    let t = series[0].values.len();
    for s in series {
        if s.values.len() != t {
            return Err(Error::InvalidInput(format!(
                "series `{}` has length {}, expected {}",
                s.name,
                s.values.len(),
                t
            )));
        }
        if let Some(w) = &s.weights {
            if w.len() != t {
                return Err(Error::InvalidInput(format!(
                    "series `{}` has {} weights, expected {}",
                    s.name,
                    w.len(),
                    t
                )));
            }
        }
    }
    if let Some(m) = mask {
        if m.len() != t {
            return Err(Error::InvalidInput(format!(
                "mask has length {}, expected {}",
                m.len(),
                t
            )));
        }
    }
    let keep: Vec<usize> = (0..t).filter(|&i| mask.is_none_or(|m| m[i])).collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput("mask selects no periods".into()));
    }
    let k = series.len();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        values[i * k + i] = 1.0;
        for j in i + 1..k {
            let a: Vec<f64> = keep.iter().map(|&x| series[i].values[x]).collect();
            let b: Vec<f64> = keep.iter().map(|&x| series[j].values[x]).collect();
            let w: Vec<f64> = keep
                .iter()
                .map(|&x| {
                    let wi = series[i].weights.as_ref().map_or(1.0, |w| w[x]);
                    let wj = series[j].weights.as_ref().map_or(1.0, |w| w[x]);
                    wi * wj
                })
                .collect();
            let r = weighted_corr(&a, &b, &w).map_err(|e| match e {
                Error::UndefinedCorrelation(which) => Error::UndefinedCorrelation(
                    if which == "first" { &series[i].name } else { &series[j].name }.clone(),
                ),
                other => other,
            })?;
            values[i * k + j] = r;
            values[j * k + i] = r;
        }
    }
    Ok(CorrMatrix {
        labels: series.iter().map(|s| s.name.clone()).collect(),
        values,
    })
}

/// Weekly mean of a daily series; the last partial week is dropped.
pub fn weekly_average(daily: &[f64], days_per_week: usize) -> Vec<f64> {
    assert!(days_per_week > 0);
    daily
        .chunks_exact(days_per_week)
        .map(|week| week.iter().sum::<f64>() / days_per_week as f64)
        .collect()
}

/// Weekly harmonic mean of daily visibility distances with a floor applied
/// to each daily value before averaging.
pub fn weekly_harmonic_visibility(daily: &[f64], days_per_week: usize, floor: f64) -> Vec<f64> {
    assert!(days_per_week > 0);
    assert!(floor > 0.0);
    daily
        .chunks_exact(days_per_week)
        .map(|week| {
            let inv_sum: f64 = week.iter().map(|&d| 1.0 / d.max(floor)).sum();
            week.len() as f64 / inv_sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_correlation_is_one_and_negation_is_minus_one() {
        let a = vec![0.2, 0.9, 0.4, 0.7, 0.1];
        let w = vec![1.0, 2.0, 0.5, 1.5, 1.0];
        let r = weighted_corr(&a, &a, &w).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let r = weighted_corr(&a, &neg, &w).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_point_hand_computation() {
        // a = (1,2,3), b = (1,2,4), w = (1,1,2).
        // Weighted means: 2.25 and 2.75. Deviations a: (-1.25,-0.25,0.75),
        // b: (-1.75,-0.75,1.25). cov = 1*2.1875 + 1*0.1875 + 2*0.9375 = 4.25,
        // var_a = 1.5625+0.0625+2*0.5625 = 2.75,
        // var_b = 3.0625+0.5625+2*1.5625 = 6.75.
        let r = weighted_corr(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0], &[1.0, 1.0, 2.0]).unwrap();
        let expected = 4.25 / (2.75f64 * 6.75).sqrt();
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }

    #[test]
    fn symmetry_and_affine_invariance() {
        let a = vec![0.4, 0.1, 0.9, 0.3, 0.6, 0.2];
        let b = vec![1.2, -0.4, 0.8, 0.0, 0.5, 0.9];
        let w = vec![1.0, 0.7, 1.3, 0.2, 2.0, 1.1];
        let r_ab = weighted_corr(&a, &b, &w).unwrap();
        let r_ba = weighted_corr(&b, &a, &w).unwrap();
        assert!((r_ab - r_ba).abs() < 1e-12);

        // Positive affine map leaves r unchanged; negative scale flips sign.
        let a_pos: Vec<f64> = a.iter().map(|x| 3.0 * x + 7.0).collect();
        let a_neg: Vec<f64> = a.iter().map(|x| -2.0 * x + 1.0).collect();
        assert!((weighted_corr(&a_pos, &b, &w).unwrap() - r_ab).abs() < 1e-12);
        assert!((weighted_corr(&a_neg, &b, &w).unwrap() + r_ab).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_reduce_to_plain_pearson() {
        let a = vec![0.3, 0.8, 0.2, 0.9, 0.5];
        let b = vec![0.1, 0.6, 0.3, 0.8, 0.4];
        let w = vec![2.5; 5]; // any constant weight
        let r_w = weighted_corr(&a, &b, &w).unwrap();
        // Plain Pearson by hand.
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        let r_plain = cov / (va * vb).sqrt();
        assert!((r_w - r_plain).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_undefined() {
        let a = vec![2.0; 4];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let w = vec![1.0; 4];
        assert!(matches!(
            weighted_corr(&a, &b, &w),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn state_weights_follow_capped_inverse_std_rule() {
        let series = StateSeries {
            probs: vec![0.5, 0.9, 0.0, 0.2],
            stds: vec![0.5, 0.1, 0.0, 0.4],
        };
        let w = state_series_weights(&series).unwrap();
        // inverse stds: (2, 10, inf, 2.5); median of finite = 2.5;
        // capped: (2, 2.5, 2.5, 2.5).
        assert_eq!(w, vec![2.0, 2.5, 2.5, 2.5]);
    }

    #[test]
    fn matrix_diagonal_masking_and_single_series() {
        let s1 = NamedSeries::plain("a", vec![0.1, 0.5, 0.9, 0.3]);
        let m = corr_matrix(std::slice::from_ref(&s1), None).unwrap();
        assert_eq!(m.values, vec![1.0]);

        let s2 = NamedSeries::plain("b", vec![0.2, 0.4, 0.7, 0.6]);
        let full = corr_matrix(&[s1.clone(), s2.clone()], None).unwrap();
        let all_true = vec![true; 4];
        let masked = corr_matrix(&[s1.clone(), s2.clone()], Some(&all_true)).unwrap();
        assert_eq!(full.values, masked.values);
        assert!((full.get(0, 1) - full.get(1, 0)).abs() < 1e-15);

        // A seasonal subset changes the coefficient in general.
        let season = vec![true, true, true, false];
        let sub = corr_matrix(&[s1, s2], Some(&season)).unwrap();
        assert!(sub.get(0, 1).is_finite());
    }

    #[test]
    fn planted_external_signal_is_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(14);
        let t = 120;
        let external: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();
        // State probabilities driven by the external signal plus noise.
        let probs: Vec<f64> = external
            .iter()
            .map(|&e| (0.7 * e + 0.3 * rng.random::<f64>()).clamp(0.01, 0.99))
            .collect();
        let stds: Vec<f64> = probs.iter().map(|&p| (p * (1.0 - p)).sqrt()).collect();
        let series = StateSeries { probs, stds };
        let a = NamedSeries::from_state_series("state", &series).unwrap();
        let b = NamedSeries::plain("weather", external);
        let m = corr_matrix(&[a, b], None).unwrap();
        assert!(m.get(0, 1) > 0.5, "correlation {}", m.get(0, 1));
    }

    #[test]
    fn weekly_transforms() {
        let daily: Vec<f64> = (1..=14).map(|d| d as f64).collect();
        let weekly = weekly_average(&daily, 7);
        assert_eq!(weekly, vec![4.0, 11.0]);

        // Harmonic visibility with a floor of 0.25 miles.
        let vis = vec![0.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let hv = weekly_harmonic_visibility(&vis, 7, 0.25);
        let expected = 7.0 / (1.0 / 0.25 + 6.0);
        assert!((hv[0] - expected).abs() < 1e-12);
    }
}
