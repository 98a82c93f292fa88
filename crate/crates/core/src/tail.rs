//! Hill tail-index curves with Wald bands.

use serde::{Deserialize, Serialize};

/// Two-sided 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959963984540054;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TailError {
    #[error("only {available} tail observations, need at least {needed}")]
    InsufficientTail { available: usize, needed: usize },
    #[error("tail value {0} is not strictly positive")]
    NonPositiveTailValue(f64),
    #[error("k_max must be at least 2")]
    BadKMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// Magnitudes of negative returns.
    #[default]
    Loss,
    /// Positive returns.
    Gain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillCurve {
    pub k_values: Vec<usize>,
    pub hill: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl HillCurve {
    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    /// Mean estimate over `k` in `[lo, hi]`.
    pub fn mean_over(&self, lo: usize, hi: usize) -> f64 {
        let sel: Vec<f64> = self
            .k_values
            .iter()
            .zip(&self.hill)
            .filter(|(k, _)| (lo..=hi).contains(*k))
            .map(|(_, h)| *h)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    }
}

/// Default `k_max = min(n / 10, 1000)`.
pub fn default_k_max(n: usize) -> usize {
    (n / 10).min(1000)
}

/// The positive tail sample for `side`, sorted descending.
pub fn tail_sample(returns: &[f64], side: TailSide) -> Vec<f64> {
    let mut x: Vec<f64> = match side {
        TailSide::Loss => returns.iter().filter(|r| **r < 0.0).map(|r| -r).collect(),
        TailSide::Gain => returns.iter().filter(|r| **r > 0.0).copied().collect(),
    };
    x.sort_by(|a, b| b.total_cmp(a));
    x
}

/// Hill estimates on an already positive sample (any order).
pub fn hill_from_sample(sample: &[f64], k_max: usize) -> Result<HillCurve, TailError> {
    if k_max < 2 {
        return Err(TailError::BadKMax);
    }
    if let Some(bad) = sample.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(TailError::NonPositiveTailValue(*bad));
    }
    if sample.len() < k_max + 1 {
        return Err(TailError::InsufficientTail {
            available: sample.len(),
            needed: k_max + 1,
        });
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| b.total_cmp(a));
    // Logs relative to the maximum keep the sums small and scale free.
    let logs: Vec<f64> = x.iter().map(|v| (v / x[0]).ln()).collect();

    let n = k_max - 1;
    let mut curve = HillCurve {
        k_values: Vec::with_capacity(n),
        hill: Vec::with_capacity(n),
        ci_low: Vec::with_capacity(n),
        ci_high: Vec::with_capacity(n),
    };
    let mut cum = logs[0];
    for k in 2..=k_max {
        cum += logs[k - 1];
        // H(k) = mean of ln X_(i) over the top k, minus ln X_(k+1)
        let h = cum / k as f64 - logs[k];
        let alpha = 1.0 / h;
        let half = Z_975 / (k as f64).sqrt();
        curve.k_values.push(k);
        curve.hill.push(alpha);
        curve.ci_low.push(alpha * (1.0 - half));
        curve.ci_high.push(alpha * (1.0 + half));
    }
    Ok(curve)
}

/// Hill curve of the chosen tail of a return series for `k = 2..=k_max`.
pub fn hill_curve(returns: &[f64], side: TailSide, k_max: usize) -> Result<HillCurve, TailError> {
    hill_from_sample(&tail_sample(returns, side), k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pareto(seed: u64, n: usize, alpha: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha))
            .collect()
    }

    #[test]
    fn hand_computed_k2() {
        let c = hill_from_sample(&[8.0, 4.0, 2.0, 1.0], 2).unwrap();
        assert_eq!(c.k_values, vec![2]);
        let h = ((8.0f64 / 2.0).ln() + (4.0f64 / 2.0).ln()) / 2.0;
        assert!((c.hill[0] - 1.0 / h).abs() < 1e-12);
        assert!((c.hill[0] - 2.0 / 8.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ties_are_fine() {
        let c = hill_from_sample(&[5.0, 2.0, 2.0, 2.0], 2).unwrap();
        assert!((c.hill[0] - 2.0 / (5.0f64 / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn pareto_recovery() {
        // A single curve averaged over k in [50, 500] has a spread near 0.18,
        // so the check is on the mean of independent replications.
        let reps: Vec<f64> = (0..20)
            .map(|s| {
                hill_from_sample(&pareto(100 + s, 10_000, 3.0), 1000)
                    .unwrap()
                    .mean_over(50, 500)
            })
            .collect();
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        assert!((m - 3.0).abs() < 0.15, "{m}");
        let c = hill_from_sample(&pareto(7, 10_000, 3.0), 1000).unwrap();
        let covered = (48..499)
            .filter(|&i| c.ci_low[i] <= 3.0 && 3.0 <= c.ci_high[i])
            .count();
        assert!(covered > 300);
    }

    #[test]
    fn normal_tail_drifts_above_pareto() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let cn = hill_curve(&normal, TailSide::Gain, 600).unwrap();
        let cp = hill_from_sample(&pareto(9, 10_000, 3.0), 600).unwrap();
        assert!(cn.hill[498] > cp.hill[498]);
    }

    #[test]
    fn loss_tail_uses_negatives() {
        let r = [-0.08, -0.04, -0.02, -0.01, 0.5, 0.3];
        let c = hill_curve(&r, TailSide::Loss, 2).unwrap();
        assert!((c.hill[0] - 2.0 / 8.0f64.ln()).abs() < 1e-12);
        assert!(matches!(
            hill_curve(&r, TailSide::Gain, 2),
            Err(TailError::InsufficientTail { .. })
        ));
    }

    #[test]
    fn rejects_non_positive() {
        assert_eq!(
            hill_from_sample(&[3.0, 0.0, 1.0], 2),
            Err(TailError::NonPositiveTailValue(0.0))
        );
    }

    proptest! {
        #[test]
        fn scale_invariant(seed in 0u64..1000, c in 0.001f64..1000.0) {
            let x = pareto(seed, 300, 2.5);
            let a = hill_from_sample(&x, 100).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let b = hill_from_sample(&scaled, 100).unwrap();
            for (p, q) in a.hill.iter().zip(&b.hill) {
                prop_assert!((p - q).abs() <= 1e-12 * p.abs());
            }
        }

        #[test]
        fn band_brackets_and_shrinks(seed in 0u64..1000) {
            let c = hill_from_sample(&pareto(seed, 500, 3.0), 200).unwrap();
            let w0 = (c.ci_high[0] - c.ci_low[0]) / c.hill[0] * (c.k_values[0] as f64).sqrt();
            for i in 0..c.len() {
                prop_assert!(c.ci_low[i] <= c.hill[i] && c.hill[i] <= c.ci_high[i]);
                let w = (c.ci_high[i] - c.ci_low[i]) / c.hill[i] * (c.k_values[i] as f64).sqrt();
                prop_assert!((w - w0).abs() <= 1e-12 * w0);
            }
        }
    }
}
