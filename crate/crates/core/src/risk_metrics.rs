//! Performance ratios on daily return series. Everything is in daily units
//! except Calmar, whose numerator is a compound annual growth rate.

use crate::stats::{mean, ols_line, quantile_sorted, sample_std, sorted_copy};
use crate::TRADING_DAYS;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("excess returns have zero volatility")]
    ZeroVolatility,
    #[error("series is empty")]
    EmptySeries,
    #[error("price path has no drawdown")]
    ZeroDrawdown,
    #[error("series spans {days} days, less than one year")]
    ShortSpan { days: usize },
    #[error("tail risk is zero")]
    ZeroTailRisk,
    #[error("a tail is empty")]
    EmptyTail,
    #[error("no excess return is negative")]
    NoDownside,
    #[error("benchmark excess returns have zero variance")]
    DegenerateBenchmark,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("price {0} is not positive")]
    NonPositivePrice(f64),
}

type Result<T> = std::result::Result<T, MetricError>;

fn excess(returns: &[f64], rf: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != rf.len() {
        return Err(MetricError::LengthMismatch(returns.len(), rf.len()));
    }
    Ok(returns.iter().zip(rf).map(|(r, f)| r - f).collect())
}

/// `mean(r - rf) / sd(r - rf)` with the sample (T-1) deviation.
pub fn sharpe(returns: &[f64], rf: &[f64]) -> Result<f64> {
    let ex = excess(returns, rf)?;
    if ex.len() < 2 {
        return Err(MetricError::TooFewObservations {
            needed: 2,
            got: ex.len(),
        });
    }
    let m = mean(&ex);
    let sd = sample_std(&ex);
    let size = ex.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(sd > 1e-12 * size) {
        return Err(MetricError::ZeroVolatility);
    }
    Ok(m / sd)
}

/// Largest peak-to-trough loss as a fraction of the running peak.
pub fn max_drawdown(prices: &[f64]) -> Result<f64> {
    if prices.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &p in prices {
        if !(p > 0.0) {
            return Err(MetricError::NonPositivePrice(p));
        }
        peak = peak.max(p);
        worst = worst.max((peak - p) / peak);
    }
    Ok(worst)
}

/// Compound annual growth of the returns over `T / 252` years divided by the
/// maximum drawdown of `prices` with the pre-trade value prepended.
pub fn calmar(returns: &[f64], prices: &[f64]) -> Result<f64> {
    if returns.len() != prices.len() {
        return Err(MetricError::LengthMismatch(returns.len(), prices.len()));
    }
    if returns.len() < TRADING_DAYS as usize {
        return Err(MetricError::ShortSpan {
            days: returns.len(),
        });
    }
    let growth: f64 = returns.iter().map(|r| (1.0 + r).ln()).sum();
    let years = returns.len() as f64 / TRADING_DAYS;
    let cagr = (growth / years).exp() - 1.0;
    let mut path = Vec::with_capacity(prices.len() + 1);
    path.push(prices[0] / (1.0 + returns[0]));
    path.extend_from_slice(prices);
    let mdd = max_drawdown(&path)?;
    if mdd <= 0.0 {
        return Err(MetricError::ZeroDrawdown);
    }
    Ok(cagr / mdd)
}

fn min_obs(confidence: f64) -> usize {
    (1.0 / (1.0 - confidence) - 1e-9).ceil() as usize
}

fn check_len(returns: &[f64], confidence: f64) -> Result<()> {
    let needed = min_obs(confidence).max(1);
    if returns.len() < needed {
        return Err(MetricError::TooFewObservations {
            needed,
            got: returns.len(),
        });
    }
    Ok(())
}

/// Empirical `(1 - confidence)` quantile (type 7). Losses are negative.
pub fn var(returns: &[f64], confidence: f64) -> Result<f64> {
    check_len(returns, confidence)?;
    Ok(quantile_sorted(&sorted_copy(returns), 1.0 - confidence))
}

/// Mean of the returns at or below [`var`].
pub fn cvar(returns: &[f64], confidence: f64) -> Result<f64> {
    check_len(returns, confidence)?;
    let sorted = sorted_copy(returns);
    let q = quantile_sorted(&sorted, 1.0 - confidence);
    let tail: Vec<f64> = sorted.iter().copied().take_while(|&r| r <= q).collect();
    if tail.is_empty() {
        return Err(MetricError::EmptyTail);
    }
    Ok(mean(&tail))
}

/// Mean excess return per unit of CVaR: `mean(r - rf) / |CVaR|`.
pub fn starr(returns: &[f64], rf: &[f64], confidence: f64) -> Result<f64> {
    let ex = excess(returns, rf)?;
    let tail = cvar(returns, confidence)?;
    if tail == 0.0 {
        return Err(MetricError::ZeroTailRisk);
    }
    Ok(mean(&ex) / tail.abs())
}

/// Expected tail gain at level `alpha` over the absolute expected tail loss
/// at level `beta`. Positive for any series with gains in its upper tail.
pub fn rachev(returns: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    let negated: Vec<f64> = returns.iter().map(|r| -r).collect();
    let gain = -cvar(&negated, alpha)?;
    let loss = cvar(returns, beta)?;
    if loss == 0.0 {
        return Err(MetricError::ZeroTailRisk);
    }
    Ok(gain / loss.abs())
}

/// `mean(r - rf) / sqrt(mean(min(r - rf, 0)^2))`.
pub fn sortino(returns: &[f64], rf: &[f64]) -> Result<f64> {
    let ex = excess(returns, rf)?;
    if !ex.iter().any(|&e| e < 0.0) {
        return Err(MetricError::NoDownside);
    }
    let dd = (ex.iter().map(|e| e.min(0.0).powi(2)).sum::<f64>() / ex.len() as f64).sqrt();
    Ok(mean(&ex) / dd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenFit {
    pub alpha: f64,
    pub beta: f64,
}

/// Intercept and slope of `r - rf` regressed on `benchmark - rf`.
pub fn jensens_alpha(returns: &[f64], benchmark: &[f64], rf: &[f64]) -> Result<JensenFit> {
    if benchmark.len() != returns.len() {
        return Err(MetricError::LengthMismatch(returns.len(), benchmark.len()));
    }
    if returns.len() < 30 {
        return Err(MetricError::TooFewObservations {
            needed: 30,
            got: returns.len(),
        });
    }
    let y = excess(returns, rf)?;
    let x = excess(benchmark, rf)?;
    let (alpha, beta) = ols_line(&y, &x).ok_or(MetricError::DegenerateBenchmark)?;
    Ok(JensenFit { alpha, beta })
}

/// One row of the performance tables. Metrics that are undefined for the
/// series (e.g. Calmar on less than a year) are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub sharpe: f64,
    pub sortino: f64,
    pub calmar: f64,
    pub starr95: f64,
    pub rachev: f64,
    pub jensens_alpha: f64,
    pub max_drawdown: f64,
    pub var95: f64,
    pub cvar95: f64,
    pub var99: f64,
    pub cvar99: f64,
    pub n_obs: usize,
}

impl RatioReport {
    /// Metric names in output order.
    pub const METRICS: [&'static str; 11] = [
        "sharpe",
        "sortino",
        "calmar",
        "starr95",
        "rachev",
        "jensens_alpha",
        "max_drawdown",
        "var95",
        "cvar95",
        "var99",
        "cvar99",
    ];

    pub fn compute(returns: &[f64], prices: &[f64], rf: &[f64], benchmark: &[f64]) -> Self {
        fn or_nan(name: &str, r: Result<f64>) -> f64 {
            r.unwrap_or_else(|e| {
                log::debug!("{name} undefined: {e}");
                f64::NAN
            })
        }
        let mut path = Vec::with_capacity(prices.len() + 1);
        if let (Some(p), Some(r)) = (prices.first(), returns.first()) {
            path.push(p / (1.0 + r));
        }
        path.extend_from_slice(prices);
        Self {
            sharpe: or_nan("sharpe", sharpe(returns, rf)),
            sortino: or_nan("sortino", sortino(returns, rf)),
            calmar: or_nan("calmar", calmar(returns, prices)),
            starr95: or_nan("starr", starr(returns, rf, 0.95)),
            rachev: or_nan("rachev", rachev(returns, 0.95, 0.95)),
            jensens_alpha: or_nan(
                "jensens_alpha",
                jensens_alpha(returns, benchmark, rf).map(|j| j.alpha),
            ),
            max_drawdown: or_nan("max_drawdown", max_drawdown(&path)),
            var95: or_nan("var95", var(returns, 0.95)),
            cvar95: or_nan("cvar95", cvar(returns, 0.95)),
            var99: or_nan("var99", var(returns, 0.99)),
            cvar99: or_nan("cvar99", cvar(returns, 0.99)),
            n_obs: returns.len(),
        }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        Some(match metric {
            "sharpe" => self.sharpe,
            "sortino" => self.sortino,
            "calmar" => self.calmar,
            "starr95" | "starr" => self.starr95,
            "rachev" => self.rachev,
            "jensens_alpha" | "alpha" => self.jensens_alpha,
            "max_drawdown" | "mdd" => self.max_drawdown,
            "var95" => self.var95,
            "cvar95" => self.cvar95,
            "var99" => self.var99,
            "cvar99" => self.cvar99,
            _ => return None,
        })
    }

    pub fn values(&self) -> Vec<(&'static str, f64)> {
        Self::METRICS
            .iter()
            .map(|m| (*m, self.get(m).unwrap_or(f64::NAN)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StudentT};

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(
            sharpe(&[0.01; 5], &zeros(5)),
            Err(MetricError::ZeroVolatility)
        );
        assert_eq!(sharpe(&[0.01, -0.01], &zeros(2)).unwrap(), 0.0);
        let s = sharpe(&[0.01, 0.03, 0.02], &[0.01; 3]).unwrap();
        assert!((s - 0.01 / 0.01).abs() < 1e-12);
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(max_drawdown(&[100.0, 50.0, 75.0]).unwrap(), 0.5);
        assert_eq!(max_drawdown(&[]), Err(MetricError::EmptySeries));
    }

    #[test]
    fn calmar_doubling_with_half_drawdown() {
        // 252 daily returns: fall to half over the first half year, then
        // recover to 2x; CAGR is exactly 1 and the trough halves the start.
        let n = 252;
        let down = 0.5f64.powf(1.0 / 126.0) - 1.0;
        let up = 4.0f64.powf(1.0 / 126.0) - 1.0;
        let returns: Vec<f64> = (0..n).map(|t| if t < 126 { down } else { up }).collect();
        let mut v = 100.0;
        let prices: Vec<f64> = returns
            .iter()
            .map(|r| {
                v *= 1.0 + r;
                v
            })
            .collect();
        assert!((prices[n - 1] - 200.0).abs() < 1e-9);
        assert!((calmar(&returns, &prices).unwrap() - 2.0).abs() < 1e-9);

        let flat = vec![0.0; 300];
        assert_eq!(calmar(&flat, &[100.0; 300]), Err(MetricError::ZeroDrawdown));
        assert!(matches!(
            calmar(&flat[..10], &[100.0; 10]),
            Err(MetricError::ShortSpan { .. })
        ));
    }

    #[test]
    fn var_pins_type7_value() {
        let mut r = vec![-0.05; 5];
        r.extend(vec![0.01; 95]);
        // sorted position (n - 1) * 0.05 = 4.95 lies between the last loss
        // and the first gain: -0.05 + 0.95 * 0.06
        let expected = -0.05 + 0.95 * (0.01 - -0.05);
        assert!((var(&r, 0.95).unwrap() - expected).abs() < 1e-15);
        assert!((var(&r, 0.95).unwrap() - 0.007).abs() < 1e-15);

        let alt: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        assert_eq!(var(&alt, 0.95).unwrap(), -0.01);
        assert!(matches!(
            var(&alt[..10], 0.95),
            Err(MetricError::TooFewObservations { needed: 20, .. })
        ));
    }

    #[test]
    fn cvar_examples() {
        assert!((cvar(&[-0.01; 30], 0.95).unwrap() + 0.01).abs() < 1e-15);
        let mut r = vec![-0.10, -0.02];
        r.extend(vec![0.01; 98]);
        assert!((cvar(&r, 0.98).unwrap() + 0.06).abs() < 1e-15);
    }

    #[test]
    fn starr_examples() {
        // mean 0.001, worst-5% mean -0.02
        let mut r = vec![-0.02; 5];
        let rest = (0.001 * 100.0 + 0.1) / 95.0;
        r.extend(vec![rest; 95]);
        assert!((starr(&r, &zeros(100), 0.95).unwrap() - 0.05).abs() < 1e-12);
        let sym: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        assert_eq!(starr(&sym, &zeros(100), 0.95).unwrap(), 0.0);
    }

    #[test]
    fn rachev_symmetric_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = StudentT::new(5.0).unwrap();
        let r: Vec<f64> = (0..10_000).map(|_| 0.01 * t.sample(&mut rng)).collect();
        let ratio = rachev(&r, 0.95, 0.95).unwrap();
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn rachev_all_positive_skewed() {
        let r: Vec<f64> = (1..=20).map(|i| 0.001 * (i as f64).powi(2)).collect();
        // gain tail is the single largest value, loss tail the smallest
        let gain = 0.001 * 400.0;
        let loss = 0.001;
        let ratio = rachev(&r, 0.95, 0.95).unwrap();
        assert!((ratio - gain / loss).abs() < 1e-9);
        assert!(ratio > 1.0);
    }

    #[test]
    fn sortino_examples() {
        let s = sortino(&[0.01, -0.01], &zeros(2)).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(
            sortino(&[0.01, 0.02], &zeros(2)),
            Err(MetricError::NoDownside)
        );
        let s = sortino(&[0.02, -0.01], &zeros(2)).unwrap();
        assert!((s - 0.005 / (0.0001f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn jensen_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = StudentT::new(5.0).unwrap();
        let b: Vec<f64> = (0..200).map(|_| 0.01 * t.sample(&mut rng)).collect();
        let rf = vec![0.0001; 200];
        let j = jensens_alpha(&b, &b, &rf).unwrap();
        assert!(j.alpha.abs() < 1e-12 && (j.beta - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = b.iter().map(|v| v + 0.0001).collect();
        let j = jensens_alpha(&shifted, &b, &rf).unwrap();
        assert!((j.alpha - 0.0001).abs() < 1e-12);
        assert_eq!(
            jensens_alpha(&b, &vec![0.0001; 200], &rf),
            Err(MetricError::DegenerateBenchmark)
        );
        assert!(matches!(
            jensens_alpha(&b[..10], &b[..10], &rf[..10]),
            Err(MetricError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn report_has_every_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = StudentT::new(4.0).unwrap();
        let r: Vec<f64> = (0..600)
            .map(|_| 0.0004 + 0.01 * t.sample(&mut rng))
            .collect();
        let mut v = 100.0;
        let p: Vec<f64> = r
            .iter()
            .map(|x| {
                v *= 1.0 + x;
                v
            })
            .collect();
        let rep = RatioReport::compute(&r, &p, &vec![0.0; 600], &r);
        for (name, value) in rep.values() {
            assert!(value.is_finite(), "{name}");
        }
        assert!(rep.cvar95 <= rep.var95 && rep.cvar99 <= rep.var99);
        assert!(rep.jensens_alpha.abs() < 1e-12);
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-0.2f64..0.2, 100..400)
    }

    proptest! {
        #[test]
        fn tail_ordering(r in series()) {
            let v95 = var(&r, 0.95).unwrap();
            let c95 = cvar(&r, 0.95).unwrap();
            let v99 = var(&r, 0.99).unwrap();
            let c99 = cvar(&r, 0.99).unwrap();
            prop_assert!(c95 <= v95 && c99 <= v99 && c99 <= c95);
        }

        #[test]
        fn location_shift(r in series(), c in -0.01f64..0.01) {
            let rf = vec![0.0001; r.len()];
            let r2: Vec<f64> = r.iter().map(|x| x + c).collect();
            let rf2: Vec<f64> = rf.iter().map(|x| x + c).collect();
            let (a, b) = (sharpe(&r, &rf).unwrap(), sharpe(&r2, &rf2).unwrap());
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            if let (Ok(a), Ok(b)) = (sortino(&r, &rf), sortino(&r2, &rf2)) {
                prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn positive_scaling(r in series(), k in 0.1f64..10.0) {
            let rf = vec![0.0002; r.len()];
            let r2: Vec<f64> = r.iter().map(|x| k * x).collect();
            let rf2: Vec<f64> = rf.iter().map(|x| k * x).collect();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
            prop_assert!(close(sharpe(&r, &rf).unwrap(), sharpe(&r2, &rf2).unwrap()));
            prop_assert!(close(sortino(&r, &rf).unwrap(), sortino(&r2, &rf2).unwrap()));
            prop_assert!(close(starr(&r, &rf, 0.95).unwrap(), starr(&r2, &rf2, 0.95).unwrap()));
            prop_assert!(close(rachev(&r, 0.95, 0.95).unwrap(), rachev(&r2, 0.95, 0.95).unwrap()));
        }

        #[test]
        fn drawdown_scale_invariant(p in prop::collection::vec(1.0f64..200.0, 1..200), k in 0.01f64..100.0) {
            let a = max_drawdown(&p).unwrap();
            let q: Vec<f64> = p.iter().map(|x| x * k).collect();
            prop_assert!((a - max_drawdown(&q).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn jensen_self_is_zero(r in prop::collection::vec(-0.1f64..0.1, 30..200)) {
            let rf = vec![0.0001; r.len()];
            let j = jensens_alpha(&r, &r, &rf).unwrap();
            prop_assert!(j.alpha.abs() < 1e-12);
        }
    }
}
