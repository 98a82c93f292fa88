//! Scenario CVaR portfolios: minimum CVaR and maximum STARR.
//!
//! The Rockafellar-Uryasev program has one row per scenario, which is large
//! for 10,000 simulated draws. We solve its LP dual instead, where scenarios
//! become columns and only `N + 1` rows remain, then read the primal weights
//! off the simplex multipliers.

use crate::lp::{self, LpOptions, LpProblem};
use crate::mean_variance::OptimError;
use crate::portfolio::{Regime, WeightVector, DEFAULT_BOX_BOUND};

type Result<T> = std::result::Result<T, OptimError>;

/// Smallest scenario count accepted by the optimizers.
pub const MIN_SCENARIOS: usize = 50;

#[derive(Debug, Clone)]
pub struct CvarProblem<'a> {
    /// `S x N`, one row per scenario.
    pub scenarios: &'a [Vec<f64>],
    pub tickers: Vec<String>,
    pub confidence: f64,
    pub rf_daily: f64,
    pub regime: Regime,
    /// Long-short box `|w_i| <= box_bound`.
    pub box_bound: f64,
}

impl<'a> CvarProblem<'a> {
    pub fn new(
        scenarios: &'a [Vec<f64>],
        tickers: Vec<String>,
        confidence: f64,
        rf_daily: f64,
        regime: Regime,
    ) -> Self {
        Self {
            scenarios,
            tickers,
            confidence,
            rf_daily,
            regime,
            box_bound: DEFAULT_BOX_BOUND,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.tickers.len();
        if n == 0 {
            return Err(OptimError::Invalid("no assets".into()));
        }
        if self.scenarios.len() < MIN_SCENARIOS {
            return Err(OptimError::Invalid(format!(
                "{} scenarios, need at least {MIN_SCENARIOS}",
                self.scenarios.len()
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(OptimError::Invalid(format!(
                "confidence {} outside (0, 1)",
                self.confidence
            )));
        }
        if self
            .scenarios
            .iter()
            .any(|r| r.len() != n || r.iter().any(|v| !v.is_finite()))
        {
            return Err(OptimError::Invalid(
                "scenario rows must be finite with one value per asset".into(),
            ));
        }
        if self.regime == Regime::LongShort && !(self.box_bound.is_finite() && self.box_bound > 0.0)
        {
            return Err(OptimError::UnboundedDescent);
        }
        Ok(())
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.tickers.len();
        match self.regime {
            Regime::LongOnly => (vec![0.0; n], vec![1.0; n]),
            Regime::LongShort => (vec![-self.box_bound; n], vec![self.box_bound; n]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvarSolution {
    pub weights: WeightVector,
    /// Portfolio CVaR as a signed return (losses negative).
    pub cvar: f64,
    /// Portfolio VaR as a signed return.
    pub var: f64,
    /// Mean scenario return minus the risk-free rate.
    pub mean_excess: f64,
    pub lp_iterations: usize,
}

impl CvarSolution {
    /// `mean excess / |CVaR|`.
    pub fn starr(&self) -> f64 {
        self.mean_excess / self.cvar.abs()
    }
}

/// CVaR of a scenario return series as the Rockafellar-Uryasev minimum:
/// the mean of the worst `(1 - c) S` outcomes, counting the boundary
/// outcome fractionally. Signed like a return.
pub fn scenario_cvar(returns: &[f64], confidence: f64) -> f64 {
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (1.0 - confidence) * sorted.len() as f64;
    let whole = (k.floor() as usize).min(sorted.len());
    let mut total: f64 = sorted[..whole].iter().sum();
    let frac = k - whole as f64;
    if frac > 1e-12 && whole < sorted.len() {
        total += frac * sorted[whole];
    }
    total / k
}

fn portfolio_series(scenarios: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    scenarios
        .iter()
        .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect()
}

/// Scaled scenario data shared by the LP solves of one problem.
struct Prepared {
    scaled: Vec<Vec<f64>>,
    scale: f64,
    lb: Vec<f64>,
    ub: Vec<f64>,
    hint: Vec<bool>,
    k: f64,
}

impl Prepared {
    fn new(p: &CvarProblem<'_>) -> Self {
        let n = p.tickers.len();
        let max_abs = p
            .scenarios
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if max_abs > 0.0 { 1.0 / max_abs } else { 1.0 };
        let scaled: Vec<Vec<f64>> = p
            .scenarios
            .iter()
            .map(|r| r.iter().map(|v| v * scale).collect())
            .collect();
        let (lb, ub) = p.bounds();
        let s = scaled.len();
        let k = 1.0 / ((1.0 - p.confidence) * s as f64);

        // Warm start: the equal-weight portfolio's tail scenarios carry the
        // full tail probability in most optimal bases.
        let ew = vec![1.0 / n as f64; n];
        let ew_ret = portfolio_series(&scaled, &ew);
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| ew_ret[a].total_cmp(&ew_ret[b]));
        let tail = ((1.0 - p.confidence) * s as f64).floor() as usize;
        let mut hint = vec![false; s + 1 + 2 * n];
        for &i in order.iter().take(tail) {
            hint[i] = true;
        }
        Self {
            scaled,
            scale,
            lb,
            ub,
            hint,
            k,
        }
    }

    /// Solves `min_w a * CVaR_loss(w) - g'w` over the regime's feasible set
    /// and returns the weights, the LP iteration count and the scenarios
    /// whose tail probability sits at its cap.
    fn solve(
        &self,
        g: &[f64],
        a: f64,
        hint: Option<&[bool]>,
    ) -> Result<(Vec<f64>, usize, Vec<bool>)> {
        let s = self.scaled.len();
        let n = self.lb.len();
        let cols = s + 1 + 2 * n;
        let m = n + 1;
        let lb_sum: f64 = self.lb.iter().sum();

        let mut c = Vec::with_capacity(cols);
        for r in &self.scaled {
            c.push(r.iter().zip(&self.lb).map(|(x, l)| x * l).sum());
        }
        c.push(-(1.0 - lb_sum));
        c.extend(self.lb.iter().zip(&self.ub).map(|(l, u)| u - l));
        c.extend(std::iter::repeat_n(0.0, n));

        let mut amat = nalgebra::DMatrix::zeros(m, cols);
        for (j, r) in self.scaled.iter().enumerate() {
            amat[(0, j)] = 1.0;
            for i in 0..n {
                amat[(i + 1, j)] = r[i];
            }
        }
        for i in 0..n {
            amat[(i + 1, s)] = 1.0;
            amat[(i + 1, s + 1 + i)] = -1.0;
            amat[(i + 1, s + 1 + n + i)] = 1.0;
        }
        let mut b = vec![a];
        b.extend(g.iter().map(|v| -v));

        let mut lo = vec![0.0; cols];
        let mut hi = vec![f64::INFINITY; cols];
        for h in hi.iter_mut().take(s) {
            *h = a * self.k;
        }
        lo[s] = f64::NEG_INFINITY;

        let opts = LpOptions {
            start_at_upper: if a > 0.0 {
                Some(hint.unwrap_or(&self.hint).to_vec())
            } else {
                None
            },
            ..LpOptions::default()
        };
        let problem = LpProblem {
            c,
            a: amat,
            b,
            lb: lo,
            ub: hi,
        };
        let sol = lp::solve(&problem, &opts).map_err(|e| match e {
            lp::LpError::Infeasible(_) => OptimError::Infeasible(e.to_string()),
            lp::LpError::Unbounded => OptimError::UnboundedDescent,
            other => OptimError::SolverFailure(other.to_string()),
        })?;
        let w: Vec<f64> = (0..n)
            .map(|i| (self.lb[i] - sol.duals[i + 1]).clamp(self.lb[i], self.ub[i]))
            .collect();
        let cap = a * self.k;
        let mut at_cap = vec![false; cols];
        for (flag, x) in at_cap.iter_mut().zip(&sol.x[..s]) {
            *flag = cap > 0.0 && *x >= cap * (1.0 - 1e-9);
        }
        Ok((w, sol.iterations, at_cap))
    }

    fn loss(&self, w: &[f64], confidence: f64) -> f64 {
        -scenario_cvar(&portfolio_series(&self.scaled, w), confidence)
    }
}

fn finish(p: &CvarProblem<'_>, mut w: Vec<f64>, iterations: usize) -> Result<CvarSolution> {
    let sum: f64 = w.iter().sum();
    if p.regime == Regime::LongOnly {
        w.iter_mut().for_each(|v| *v /= sum);
    } else if (sum - 1.0).abs() > 1e-12 {
        // Spread the round-off over the assets with slack.
        let slack: Vec<usize> = (0..w.len())
            .filter(|&i| w[i].abs() < p.box_bound - 1e-9)
            .collect();
        let share = (1.0 - sum) / slack.len().max(1) as f64;
        for i in slack {
            w[i] += share;
        }
    }
    let series = portfolio_series(p.scenarios, &w);
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let cvar = scenario_cvar(&series, p.confidence);
    let mut sorted = series;
    sorted.sort_by(f64::total_cmp);
    let idx =
        (((1.0 - p.confidence) * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    Ok(CvarSolution {
        weights: WeightVector::new(p.tickers.clone(), w, p.regime)?,
        cvar,
        var: sorted[idx],
        mean_excess: mean - p.rf_daily,
        lp_iterations: iterations,
    })
}

/// Minimum-CVaR portfolio over the scenarios at `p.confidence`.
pub fn min_cvar_portfolio(p: &CvarProblem<'_>) -> Result<CvarSolution> {
    p.validate()?;
    let prep = Prepared::new(p);
    let g = vec![0.0; p.tickers.len()];
    let (w, it, _) = prep.solve(&g, 1.0, None)?;
    finish(p, w, it)
}

/// Maximum STARR portfolio, `max (mean(w'r) - rf) / |CVaR(w'r)|`, by
/// Dinkelbach iterations over the minimum-CVaR LP.
pub fn max_starr_portfolio(p: &CvarProblem<'_>) -> Result<CvarSolution> {
    p.validate()?;
    let prep = Prepared::new(p);
    let n = p.tickers.len();
    let s = prep.scaled.len() as f64;
    let mut g = vec![0.0; n];
    for r in &prep.scaled {
        for i in 0..n {
            g[i] += r[i] / s;
        }
    }
    let rf = p.rf_daily * prep.scale;
    g.iter_mut().for_each(|v| *v -= rf);
    let excess = |w: &[f64]| w.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();

    // Largest attainable mean excess decides whether a positive ratio exists.
    let (mut w, mut iters, _) = prep.solve(&g, 0.0, None)?;
    let mut hint: Option<Vec<bool>> = None;
    if !(excess(&w) > 1e-12) {
        return Err(OptimError::NoTangency);
    }
    let loss = prep.loss(&w, p.confidence);
    if !(loss > 0.0) {
        // The best-mean portfolio never loses in the tail: no finite optimum.
        return Err(OptimError::SolverFailure(
            "tail risk is non-positive at the maximum-mean portfolio".into(),
        ));
    }
    let mut lambda = excess(&w) / loss;
    for _ in 0..100 {
        // each step starts from the previous step's tail set
        let (cand, it, tail) = prep.solve(&g, lambda, hint.as_deref())?;
        hint = Some(tail);
        iters += it;
        let l = prep.loss(&cand, p.confidence);
        let f = excess(&cand) - lambda * l;
        if l > 0.0 {
            let ratio = excess(&cand) / l;
            if ratio > lambda {
                w = cand;
                let step = ratio - lambda;
                lambda = ratio;
                if step <= 1e-10 * lambda.abs().max(1.0) {
                    break;
                }
                continue;
            }
        }
        if f <= 1e-12 {
            break;
        }
        return Err(OptimError::SolverFailure(format!(
            "Dinkelbach step did not improve the ratio (F = {f:.3e})"
        )));
    }
    finish(p, w, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_metrics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StudentT};

    fn tickers(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    pub(crate) fn simulated(seed: u64, s: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = StudentT::new(4.0).unwrap();
        let drift: Vec<f64> = (0..n).map(|i| 0.0004 * (i as f64 + 1.0) - 0.0005).collect();
        let vol: Vec<f64> = (0..n).map(|i| 0.008 + 0.004 * i as f64).collect();
        (0..s)
            .map(|_| {
                let common: f64 = t.sample(&mut rng);
                (0..n)
                    .map(|i| {
                        drift[i]
                            + vol[i] * (0.5 * common + t.sample(&mut rng)) / 1.6
                            + rng.random_range(-1e-4..1e-4)
                    })
                    .collect()
            })
            .collect()
    }

    fn grid_min_cvar(sc: &[Vec<f64>], conf: f64, step: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=step {
            for j in 0..=(step - i) {
                let w = [
                    i as f64 / step as f64,
                    j as f64 / step as f64,
                    (step - i - j) as f64 / step as f64,
                ];
                best = best.min(-scenario_cvar(&portfolio_series(sc, &w), conf));
            }
        }
        best
    }

    #[test]
    fn scenario_cvar_counts_boundary_fractionally() {
        let r: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((scenario_cvar(&r, 0.95) - 3.0).abs() < 1e-12);
        assert!((scenario_cvar(&r, 0.975) - (1.0 + 2.0 + 0.5 * 3.0) / 2.5).abs() < 1e-12);
    }

    #[test]
    fn one_asset_takes_everything() {
        let sc = simulated(1, 100, 1);
        for regime in [Regime::LongOnly, Regime::LongShort] {
            let p = CvarProblem::new(&sc, tickers(1), 0.95, 0.0, regime);
            assert!((min_cvar_portfolio(&p).unwrap().weights.weights[0] - 1.0).abs() < 1e-12);
        }
        let mut up = sc.clone();
        up.iter_mut().for_each(|r| r[0] += 0.01);
        let p = CvarProblem::new(&up, tickers(1), 0.95, 0.0, Regime::LongOnly);
        assert!((max_starr_portfolio(&p).unwrap().weights.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominated_asset_is_dropped() {
        let base = simulated(2, 120, 1);
        let sc: Vec<Vec<f64>> = base
            .iter()
            .map(|r| vec![r[0], r[0] - 0.01 - r[0].abs()])
            .collect();
        let p = CvarProblem::new(&sc, tickers(2), 0.95, 0.0, Regime::LongOnly);
        let w = min_cvar_portfolio(&p).unwrap().weights.weights;
        assert!((w[0] - 1.0).abs() < 1e-9 && w[1].abs() < 1e-9);
    }

    #[test]
    fn min_cvar_beats_grid() {
        let sc = simulated(3, 200, 3);
        let p = CvarProblem::new(&sc, tickers(3), 0.95, 0.0, Regime::LongOnly);
        let sol = min_cvar_portfolio(&p).unwrap();
        let grid = grid_min_cvar(&sc, 0.95, 50);
        assert!(-sol.cvar <= grid + 1e-6, "lp {} grid {}", -sol.cvar, grid);
        // a fine grid closes the gap from above
        let fine = grid_min_cvar(&sc, 0.95, 400);
        assert!(fine - (-sol.cvar) < 2e-4 * fine.abs());
    }

    #[test]
    fn reported_cvar_is_empirical() {
        let sc = simulated(4, 300, 4);
        for regime in [Regime::LongOnly, Regime::LongShort] {
            let p = CvarProblem::new(&sc, tickers(4), 0.99, 0.0, regime);
            let sol = min_cvar_portfolio(&p).unwrap();
            let series = portfolio_series(&sc, &sol.weights.weights);
            assert!((sol.cvar - scenario_cvar(&series, 0.99)).abs() < 1e-8);
        }
    }

    #[test]
    fn deeper_tail_is_worse() {
        let sc = simulated(5, 400, 3);
        let sol = min_cvar_portfolio(&CvarProblem::new(
            &sc,
            tickers(3),
            0.95,
            0.0,
            Regime::LongOnly,
        ))
        .unwrap();
        let series = portfolio_series(&sc, &sol.weights.weights);
        assert!(scenario_cvar(&series, 0.99) <= scenario_cvar(&series, 0.95));
        assert!(
            risk_metrics::cvar(&series, 0.99).unwrap()
                <= risk_metrics::cvar(&series, 0.95).unwrap()
        );
    }

    #[test]
    fn exchangeable_assets_get_near_equal_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = StudentT::new(5.0).unwrap();
        let sc: Vec<Vec<f64>> = (0..20_000)
            .map(|_| (0..3).map(|_| 0.01 * t.sample(&mut rng)).collect())
            .collect();
        let w = min_cvar_portfolio(&CvarProblem::new(
            &sc,
            tickers(3),
            0.95,
            0.0,
            Regime::LongOnly,
        ))
        .unwrap()
        .weights
        .weights;
        for v in w {
            assert!((v - 1.0 / 3.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn max_starr_dominates_random_portfolios() {
        let sc = simulated(7, 200, 3);
        let rf = 0.0001;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for regime in [Regime::LongOnly, Regime::LongShort] {
            let p = CvarProblem::new(&sc, tickers(3), 0.95, rf, regime);
            let sol = max_starr_portfolio(&p).unwrap();
            let best = sol.starr();
            for _ in 0..10_000 {
                let w: Vec<f64> = match regime {
                    Regime::LongOnly => {
                        let raw: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|v| v / s).collect()
                    }
                    Regime::LongShort => {
                        let a: f64 = rng.random_range(-1.0..1.0);
                        let b: f64 = rng.random_range((-a).max(0.0) - 1.0..(1.0 - a).min(1.0));
                        vec![a, b, 1.0 - a - b]
                    }
                };
                if w.iter().any(|v| v.abs() > 1.0) {
                    continue;
                }
                let series = portfolio_series(&sc, &w);
                let mean = series.iter().sum::<f64>() / series.len() as f64 - rf;
                let ratio = mean / scenario_cvar(&series, 0.95).abs();
                assert!(ratio <= best + 1e-9, "{regime:?}: {ratio} > {best}");
            }
        }
    }

    #[test]
    fn starr_needs_positive_excess() {
        let sc: Vec<Vec<f64>> = simulated(9, 100, 2)
            .into_iter()
            .map(|r| r.iter().map(|v| v - 0.05).collect())
            .collect();
        let p = CvarProblem::new(&sc, tickers(2), 0.95, 0.0, Regime::LongOnly);
        assert_eq!(max_starr_portfolio(&p).unwrap_err(), OptimError::NoTangency);
    }

    #[test]
    fn rejects_short_scenario_sets() {
        let sc = simulated(10, 20, 2);
        let p = CvarProblem::new(&sc, tickers(2), 0.95, 0.0, Regime::LongOnly);
        assert!(matches!(
            min_cvar_portfolio(&p),
            Err(OptimError::Invalid(_))
        ));
    }
}
