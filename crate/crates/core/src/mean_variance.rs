//! Markowitz frontier: closed-form long-short solutions and constrained
//! long-only counterparts through [`crate::qp`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::portfolio::{PortfolioError, Regime, WeightVector};
use crate::qp::{self, QpOptions, QpProblem};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OptimError {
    #[error("window has {rows} rows, need at least {needed}")]
    WindowTooShort { rows: usize, needed: usize },
    #[error("covariance could not be regularized to positive definite")]
    SingularCovariance,
    #[error("frontier is degenerate (delta = {0:.3e})")]
    DegenerateFrontier(f64),
    #[error("no portfolio earns more than the risk-free rate")]
    NoTangency,
    /// The risk-free rate is at or above the GMV return, so the normalized
    /// long-short solution sits on the lower branch of the frontier.
    #[error("risk-free rate is at or above the minimum-variance return; no long-short tangency")]
    LowerBranch,
    #[error("the tangency portfolio has zero risk")]
    ZeroRiskPortfolio,
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("optimization problem is infeasible: {0}")]
    Infeasible(String),
    #[error("descent is unbounded; the problem is missing weight bounds")]
    UnboundedDescent,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}

type Result<T> = std::result::Result<T, OptimError>;

/// Sample mean and covariance of a return window, regularized to PD.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    pub tickers: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Ridge added to the diagonal (zero when the sample covariance was PD).
    pub jitter: f64,
}

/// `A = r'S^-1 r`, `B = e'S^-1 e`, `C = r'S^-1 e`, `delta = AB - C^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
}

impl FrontierCoefficients {
    /// True when all assets share one mean (or the means vanish), so the
    /// frontier collapses to a single point.
    pub fn is_degenerate(&self) -> bool {
        self.delta <= 1e-12 * (self.a * self.b).abs().max(f64::MIN_POSITIVE)
    }

    /// Return of the global minimum-variance portfolio.
    pub fn gmv_return(&self) -> f64 {
        self.c / self.b
    }

    /// Frontier variance at `target`.
    pub fn variance_at(&self, target: f64) -> f64 {
        (self.b * target * target - 2.0 * self.c * target + self.a) / self.delta
    }
}

#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub target_return: f64,
    pub stdev: f64,
    pub weights: WeightVector,
}

impl FrontierPoint {
    fn from_weights(m: &MomentEstimates, w: Vec<f64>, regime: Regime) -> Result<Self> {
        let wv = DVector::from_column_slice(&w);
        let ret = m.mean.dot(&wv);
        let var = wv.dot(&(&m.cov * &wv)).max(0.0);
        Ok(Self {
            target_return: ret,
            stdev: var.sqrt(),
            weights: WeightVector::new(m.tickers.clone(), w, regime)?,
        })
    }

    pub fn sharpe(&self, rf: f64) -> f64 {
        (self.target_return - rf) / self.stdev
    }
}

fn is_numerically_pd(cov: &DMatrix<f64>) -> bool {
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max > 0.0 && min > 1e-12 * max && cov.clone().cholesky().is_some()
}

/// Symmetrizes and adds `lambda I`, starting at `1e-10 * trace/N` and growing
/// tenfold until the matrix is numerically positive definite.
pub fn regularize(mut cov: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = cov.nrows();
    cov = (&cov + cov.transpose()) * 0.5;
    if is_numerically_pd(&cov) {
        return Ok((cov, 0.0));
    }
    let avg_var = cov.trace() / n as f64;
    // Floor keeps the ridge meaningful when the variances are rounding noise.
    let base = if avg_var.is_finite() {
        avg_var.max(1e-12)
    } else {
        1e-8
    };
    let mut lambda = 1e-10 * base;
    for _ in 0..12 {
        let mut c = cov.clone();
        for i in 0..n {
            c[(i, i)] += lambda;
        }
        if is_numerically_pd(&c) {
            return Ok((c, lambda));
        }
        lambda *= 10.0;
    }
    Err(OptimError::SingularCovariance)
}

/// Sample mean and covariance (denominator `T - 1`) of the rows of `window`.
pub fn estimate_moments(window: &[Vec<f64>], tickers: &[String]) -> Result<MomentEstimates> {
    let n = tickers.len();
    let t = window.len();
    if t < n + 2 {
        return Err(OptimError::WindowTooShort {
            rows: t,
            needed: n + 2,
        });
    }
    if window.iter().any(|r| r.len() != n) {
        return Err(OptimError::Invalid(
            "window rows do not match ticker count".into(),
        ));
    }
    let mut mean = DVector::zeros(n);
    for row in window {
        for i in 0..n {
            mean[i] += row[i];
        }
    }
    mean /= t as f64;
    let mut cov = DMatrix::zeros(n, n);
    let mut dev = vec![0.0; n];
    for row in window {
        for i in 0..n {
            dev[i] = row[i] - mean[i];
        }
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += dev[i] * dev[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / (t as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let (cov, jitter) = regularize(cov)?;
    Ok(MomentEstimates {
        tickers: tickers.to_vec(),
        mean,
        cov,
        jitter,
    })
}

struct Solved {
    inv_r: DVector<f64>,
    inv_e: DVector<f64>,
    coeffs: FrontierCoefficients,
    chol: Cholesky<f64, Dyn>,
}

fn solve_system(m: &MomentEstimates) -> Result<Solved> {
    let n = m.mean.len();
    let chol = m
        .cov
        .clone()
        .cholesky()
        .ok_or(OptimError::SingularCovariance)?;
    let e = DVector::from_element(n, 1.0);
    let inv_r = chol.solve(&m.mean);
    let inv_e = chol.solve(&e);
    let a = m.mean.dot(&inv_r);
    let b = e.dot(&inv_e);
    let c = m.mean.dot(&inv_e);
    Ok(Solved {
        inv_r,
        inv_e,
        coeffs: FrontierCoefficients {
            a,
            b,
            c,
            delta: a * b - c * c,
        },
        chol,
    })
}

pub fn frontier_coefficients(m: &MomentEstimates) -> Result<FrontierCoefficients> {
    Ok(solve_system(m)?.coeffs)
}

/// Long-short frontier portfolio `w = target * w1 + w2`.
pub fn solve_unconstrained(m: &MomentEstimates, target_return: f64) -> Result<FrontierPoint> {
    let s = solve_system(m)?;
    let FrontierCoefficients { a, b, c, delta } = s.coeffs;
    if s.coeffs.is_degenerate() {
        return Err(OptimError::DegenerateFrontier(delta));
    }
    let w1 = (&s.inv_r * b - &s.inv_e * c) / delta;
    let w2 = (&s.inv_e * a - &s.inv_r * c) / delta;
    let w = w1 * target_return + w2;
    let mut point = FrontierPoint::from_weights(m, w.iter().copied().collect(), Regime::LongShort)?;
    point.target_return = target_return;
    point.stdev = s.coeffs.variance_at(target_return).max(0.0).sqrt();
    Ok(point)
}

fn budget_row(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(1, n, 1.0)
}

fn qp_failure(e: qp::QpError) -> OptimError {
    OptimError::SolverFailure(e.to_string())
}

/// Global minimum-variance portfolio.
pub fn min_variance_portfolio(m: &MomentEstimates, regime: Regime) -> Result<FrontierPoint> {
    let n = m.mean.len();
    match regime {
        Regime::LongShort => {
            let s = solve_system(m)?;
            let w = &s.inv_e / s.coeffs.b;
            FrontierPoint::from_weights(m, w.iter().copied().collect(), regime)
        }
        Regime::LongOnly => {
            let p = QpProblem {
                q: m.cov.clone(),
                c: DVector::zeros(n),
                a_eq: budget_row(n),
                b_eq: DVector::from_element(1, 1.0),
                lb: vec![0.0; n],
                ub: vec![f64::INFINITY; n],
            };
            let x0 = DVector::from_element(n, 1.0 / n as f64);
            let sol = qp::solve(&p, &x0, QpOptions::default()).map_err(qp_failure)?;
            FrontierPoint::from_weights(m, normalize(sol.x.as_slice()), regime)
        }
    }
}

/// Clips round-off negatives and rescales to unit budget.
fn normalize(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / s).collect()
}

/// Maximum-Sharpe portfolio.
///
/// Long-short uses the closed form `S^-1 (r - rf e)` normalized to unit
/// budget. Long-only solves the equivalent homogenized program
/// `min y'Sy s.t. (r - rf e)'y = 1, y >= 0` and rescales `w = y / sum(y)`.
pub fn tangency_portfolio(
    m: &MomentEstimates,
    rf_daily: f64,
    regime: Regime,
) -> Result<FrontierPoint> {
    let n = m.mean.len();
    let excess = m.mean.map(|r| r - rf_daily);
    let best = excess.max();
    if !(best > 0.0) {
        return Err(OptimError::NoTangency);
    }
    match regime {
        Regime::LongShort => {
            let s = solve_system(m)?;
            let z = s.chol.solve(&excess);
            let budget = z.sum();
            // A non-positive budget puts the normalized portfolio on the lower
            // branch of the frontier, where no Sharpe maximum exists.
            if !(budget > 1e-12 * z.amax()) {
                return Err(OptimError::LowerBranch);
            }
            FrontierPoint::from_weights(m, (z / budget).iter().copied().collect(), regime)
        }
        Regime::LongOnly => {
            let scaled = &excess / best;
            let k = scaled.imax();
            let p = QpProblem {
                q: m.cov.clone(),
                c: DVector::zeros(n),
                a_eq: DMatrix::from_fn(1, n, |_, j| scaled[j]),
                b_eq: DVector::from_element(1, 1.0),
                lb: vec![0.0; n],
                ub: vec![f64::INFINITY; n],
            };
            let mut y0 = DVector::zeros(n);
            y0[k] = 1.0 / scaled[k];
            let sol = qp::solve(&p, &y0, QpOptions::default()).map_err(qp_failure)?;
            FrontierPoint::from_weights(m, normalize(sol.x.as_slice()), regime)
        }
    }
}

/// Frontier sampled at `n_points` targets, plus the targets that could not be
/// solved and why.
#[derive(Debug, Clone)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
    pub skipped: Vec<(f64, String)>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Long-only minimum-variance portfolio at a fixed target mean.
pub fn long_only_target(m: &MomentEstimates, target: f64) -> Result<FrontierPoint> {
    let n = m.mean.len();
    let (lo_i, lo) = m
        .mean
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |a, (i, v)| if v < a.1 { (i, v) } else { a },
        );
    let (hi_i, hi) =
        m.mean
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |a, (i, v)| if v > a.1 { (i, v) } else { a },
            );
    let span = (hi - lo).abs().max(1e-300);
    if target < lo - 1e-12 * span || target > hi + 1e-12 * span {
        return Err(OptimError::Infeasible(format!(
            "target {target} outside [{lo}, {hi}]"
        )));
    }
    let target = target.clamp(lo, hi);
    let mut x0 = DVector::zeros(n);
    if hi > lo {
        let a = (hi - target) / (hi - lo);
        x0[lo_i] = a;
        x0[hi_i] += 1.0 - a;
    } else {
        x0[hi_i] = 1.0;
    }
    let p = QpProblem {
        q: m.cov.clone(),
        c: DVector::zeros(n),
        a_eq: DMatrix::from_fn(2, n, |r, j| if r == 0 { 1.0 } else { m.mean[j] }),
        b_eq: DVector::from_vec(vec![1.0, target]),
        lb: vec![0.0; n],
        ub: vec![f64::INFINITY; n],
    };
    let sol = qp::solve(&p, &x0, QpOptions::default()).map_err(qp_failure)?;
    FrontierPoint::from_weights(m, normalize(sol.x.as_slice()), Regime::LongOnly)
}

/// Samples the efficient frontier. Long-short targets run from the GMV return
/// to `GMV + 4 (max mean - GMV)`; long-only targets run from the long-only
/// minimum-variance return to the largest asset mean.
pub fn frontier_curve(
    m: &MomentEstimates,
    n_points: usize,
    regime: Regime,
) -> Result<FrontierCurve> {
    if n_points < 2 {
        return Err(OptimError::Invalid(
            "frontier needs at least two points".into(),
        ));
    }
    let max_mean = m.mean.max();
    let mut points = Vec::with_capacity(n_points);
    let mut skipped = Vec::new();
    match regime {
        Regime::LongShort => {
            let coeffs = frontier_coefficients(m)?;
            let gmv = coeffs.gmv_return();
            let mut span = max_mean - gmv;
            if !(span > 0.0) {
                span = (max_mean - m.mean.min()).max(gmv.abs() * 1e-3).max(1e-12);
            }
            for target in linspace(gmv, gmv + 4.0 * span, n_points) {
                match solve_unconstrained(m, target) {
                    Ok(p) => points.push(p),
                    Err(e) => skipped.push((target, e.to_string())),
                }
            }
        }
        Regime::LongOnly => {
            let mvp = min_variance_portfolio(m, Regime::LongOnly)?;
            let start = mvp.target_return.min(max_mean);
            for (k, target) in linspace(start, max_mean, n_points).into_iter().enumerate() {
                let res = if k == 0 {
                    Ok(mvp.clone())
                } else {
                    long_only_target(m, target)
                };
                match res {
                    Ok(p) => points.push(p),
                    Err(e) => skipped.push((target, e.to_string())),
                }
            }
        }
    }
    for (t, why) in &skipped {
        log::warn!("frontier target {t:.6e} skipped: {why}");
    }
    Ok(FrontierCurve { points, skipped })
}

/// Capital market line `mu = rf + slope * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalMarketLine {
    pub intercept: f64,
    pub slope: f64,
}

impl CapitalMarketLine {
    pub fn at(&self, stdev: f64) -> f64 {
        self.intercept + self.slope * stdev
    }

    /// `(stdev, return)` pairs on `[0, max_stdev]`.
    pub fn sample(&self, n: usize, max_stdev: f64) -> Vec<(f64, f64)> {
        linspace(0.0, max_stdev, n.max(2))
            .into_iter()
            .map(|s| (s, self.at(s)))
            .collect()
    }
}

pub fn capital_market_line(tangency: &FrontierPoint, rf_daily: f64) -> Result<CapitalMarketLine> {
    if !(tangency.stdev > 0.0) {
        return Err(OptimError::ZeroRiskPortfolio);
    }
    Ok(CapitalMarketLine {
        intercept: rf_daily,
        slope: (tangency.target_return - rf_daily) / tangency.stdev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tickers(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    pub(crate) fn moments(mean: &[f64], cov: DMatrix<f64>) -> MomentEstimates {
        MomentEstimates {
            tickers: tickers(mean.len()),
            mean: DVector::from_column_slice(mean),
            cov,
            jitter: 0.0,
        }
    }

    fn random_moments(rng: &mut ChaCha8Rng, n: usize) -> MomentEstimates {
        let f = DMatrix::from_fn(n, n + 3, |_, _| rng.random_range(-0.01..0.01));
        let mut cov = &f * f.transpose();
        for i in 0..n {
            cov[(i, i)] += 1e-5;
        }
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-0.0005..0.0015)).collect();
        moments(&mean, cov)
    }

    #[test]
    fn two_by_two_coefficients() {
        let m = moments(&[0.1, 0.2], DMatrix::identity(2, 2));
        let c = frontier_coefficients(&m).unwrap();
        assert!((c.a - 0.05).abs() < 1e-15);
        assert!((c.b - 2.0).abs() < 1e-15);
        assert!((c.c - 0.3).abs() < 1e-15);
        assert!((c.delta - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_mean_is_degenerate() {
        let m = moments(&[0.0, 0.0, 0.0], DMatrix::identity(3, 3) * 2.0);
        let c = frontier_coefficients(&m).unwrap();
        assert_eq!((c.a, c.c, c.delta), (0.0, 0.0, 0.0));
        assert!((c.b - 1.5).abs() < 1e-15);
        assert!(c.is_degenerate());
        assert!(matches!(
            solve_unconstrained(&m, 0.01),
            Err(OptimError::DegenerateFrontier(_))
        ));
    }

    #[test]
    fn coefficients_match_linear_solve_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_moments(&mut rng, 5);
        let c = frontier_coefficients(&m).unwrap();
        // independent route: LU solves
        let lu = m.cov.clone().lu();
        let x = lu.solve(&m.mean).unwrap();
        let y = lu.solve(&DVector::from_element(5, 1.0)).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(c.a, m.mean.dot(&x)) < 1e-9);
        assert!(rel(c.b, y.sum()) < 1e-9);
        assert!(rel(c.c, m.mean.dot(&y)) < 1e-9);
    }

    #[test]
    fn symmetric_means_give_equal_weights() {
        let m = moments(&[0.01, 0.01, 0.01], DMatrix::identity(3, 3));
        let mvp = min_variance_portfolio(&m, Regime::LongShort).unwrap();
        assert!(mvp
            .weights
            .weights
            .iter()
            .all(|w| (w - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn gmv_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_moments(&mut rng, 4);
        let c = frontier_coefficients(&m).unwrap();
        let p = solve_unconstrained(&m, c.gmv_return()).unwrap();
        assert!((p.stdev - (1.0 / c.b).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_moments(&mut rng, 4);
        let target = 0.0008;
        let p = solve_unconstrained(&m, target).unwrap();
        let w = DVector::from_column_slice(&p.weights.weights);
        assert!((m.mean.dot(&w) - target).abs() < 1e-10);
        assert!((w.dot(&(&m.cov * &w)) - p.stdev.powi(2)).abs() < 1e-10);
        assert!((w.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mvp_examples() {
        let m = moments(
            &[0.01, 0.02],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        );
        let p = min_variance_portfolio(&m, Regime::LongShort).unwrap();
        assert!((p.weights.weights[0] - 0.8).abs() < 1e-12);
        assert!((p.weights.weights[1] - 0.2).abs() < 1e-12);

        let m = moments(&[0.01, 0.03, 0.02, 0.0], DMatrix::identity(4, 4));
        let p = min_variance_portfolio(&m, Regime::LongOnly).unwrap();
        assert!(p.weights.weights.iter().all(|w| (w - 0.25).abs() < 1e-10));
    }

    #[test]
    fn long_only_mvp_clips_negative_weight() {
        // Asset 0 is a noisier version of asset 1: the LS minimum shorts it.
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 1.8, 0.0, 1.8, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let m = moments(&[0.0, 0.0, 0.0], cov.clone());
        let ls = min_variance_portfolio(&m, Regime::LongShort).unwrap();
        assert!(ls.weights.weights[0] < 0.0);
        let lo = min_variance_portfolio(&m, Regime::LongOnly).unwrap();
        assert!(lo.weights.weights[0].abs() < 1e-12);
        assert!(lo.stdev >= ls.stdev);
        // grid oracle at 0.01 resolution
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=(100 - i) {
                let w = DVector::from_vec(vec![
                    i as f64 / 100.0,
                    j as f64 / 100.0,
                    (100 - i - j) as f64 / 100.0,
                ]);
                best = best.min(w.dot(&(&cov * &w)));
            }
        }
        assert!(lo.stdev.powi(2) <= best + 1e-12);
        assert!(lo.stdev.powi(2) >= best - 1e-3);
    }

    #[test]
    fn tangency_examples() {
        let m = moments(&[0.02, 0.01], DMatrix::identity(2, 2));
        let t = tangency_portfolio(&m, 0.0, Regime::LongShort).unwrap();
        assert!((t.weights.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.weights.weights[1] - 1.0 / 3.0).abs() < 1e-12);
        let lo = tangency_portfolio(&m, 0.0, Regime::LongOnly).unwrap();
        assert!((lo.weights.weights[0] - 2.0 / 3.0).abs() < 1e-10);

        let flat = moments(&[0.01, 0.01], DMatrix::identity(2, 2));
        assert_eq!(
            tangency_portfolio(&flat, 0.01, Regime::LongShort).unwrap_err(),
            OptimError::NoTangency
        );
        assert_eq!(
            tangency_portfolio(&flat, 0.01, Regime::LongOnly).unwrap_err(),
            OptimError::NoTangency
        );
        // GMV return 0.015 sits below rf, although one asset beats it.
        assert_eq!(
            tangency_portfolio(&m, 0.016, Regime::LongShort).unwrap_err(),
            OptimError::LowerBranch
        );
        assert!(tangency_portfolio(&m, 0.016, Regime::LongOnly).is_ok());
    }

    #[test]
    fn tangency_beats_random_portfolios() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_moments(&mut rng, 5);
        let rf = 0.0001;
        for regime in [Regime::LongShort, Regime::LongOnly] {
            let t = match tangency_portfolio(&m, rf, regime) {
                Ok(t) => t,
                Err(OptimError::NoTangency | OptimError::LowerBranch) => continue,
                Err(e) => panic!("{e}"),
            };
            let best = t.sharpe(rf);
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..5).map(|_| -rng.random::<f64>().ln()).collect();
                let w = DVector::from_vec(raw.clone()) / raw.iter().sum::<f64>();
                let s = (m.mean.dot(&w) - rf) / w.dot(&(&m.cov * &w)).sqrt();
                assert!(s <= best + 1e-10, "{regime:?}: {s} > {best}");
            }
        }
    }

    #[test]
    fn curve_endpoints_and_nesting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_moments(&mut rng, 4);
        let two = frontier_curve(&m, 2, Regime::LongShort).unwrap();
        assert_eq!(two.points.len(), 2);
        let lo = frontier_curve(&m, 15, Regime::LongOnly).unwrap();
        assert!(lo.skipped.is_empty());
        for w in lo.points.windows(2) {
            assert!(w[1].stdev >= w[0].stdev - 1e-12);
        }
        for p in &lo.points {
            let ls = solve_unconstrained(&m, p.target_return).unwrap();
            assert!(p.stdev >= ls.stdev - 1e-12);
        }
    }

    #[test]
    fn two_asset_curve_matches_formula() {
        let m = moments(&[0.001, 0.002], DMatrix::identity(2, 2) * 1e-4);
        let c = frontier_coefficients(&m).unwrap();
        for p in frontier_curve(&m, 20, Regime::LongShort).unwrap().points {
            let w = DVector::from_column_slice(&p.weights.weights);
            let achieved = w.dot(&(&m.cov * &w));
            assert!((achieved - c.variance_at(p.target_return)).abs() <= 1e-9 * achieved.max(1.0));
        }
    }

    #[test]
    fn cml_examples() {
        let m = moments(&[0.0], DMatrix::identity(1, 1));
        let t = FrontierPoint {
            target_return: 0.001,
            stdev: 0.01,
            weights: WeightVector::new(m.tickers.clone(), vec![1.0], Regime::LongShort).unwrap(),
        };
        let cml = capital_market_line(&t, 0.0).unwrap();
        assert!((cml.slope - 0.1).abs() < 1e-15);
        assert!((cml.at(0.01) - 0.001).abs() < 1e-15);
        let zero = FrontierPoint { stdev: 0.0, ..t };
        assert_eq!(
            capital_market_line(&zero, 0.0).unwrap_err(),
            OptimError::ZeroRiskPortfolio
        );
    }

    #[test]
    fn cml_slope_dominates_frontier() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_moments(&mut rng, 6);
        let rf = 0.0;
        let t = tangency_portfolio(&m, rf, Regime::LongShort).unwrap();
        let cml = capital_market_line(&t, rf).unwrap();
        for p in frontier_curve(&m, 200, Regime::LongShort).unwrap().points {
            assert!((p.target_return - rf) / p.stdev <= cml.slope + 1e-9);
        }
    }

    #[test]
    fn duplicate_columns_get_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let window: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let x: f64 = rng.random_range(-0.02..0.02);
                vec![x, x, rng.random_range(-0.02..0.02)]
            })
            .collect();
        let m = estimate_moments(&window, &tickers(3)).unwrap();
        assert!(m.jitter > 0.0);
        assert!(m.cov.clone().cholesky().is_some());

        let constant = vec![vec![0.01, 0.02]; 10];
        let m = estimate_moments(&constant, &tickers(2)).unwrap();
        assert!(m.jitter > 0.0);
        assert!((m.cov[(0, 0)] / m.jitter - 1.0).abs() < 1e-9 && m.cov[(0, 1)].abs() < 1e-30);
        assert!(m.mean[0] - 0.01 < 1e-15);

        assert!(matches!(
            estimate_moments(&constant[..3], &tickers(2)),
            Err(OptimError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn monte_carlo_covariance_consistency() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let window: Vec<Vec<f64>> = (0..100_000)
            .map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let m = estimate_moments(&window, &tickers(3)).unwrap();
        for i in 0..3 {
            assert!((m.cov[(i, i)] - 1e-4).abs() < 0.05 * 1e-4);
            for j in 0..3 {
                if i != j {
                    assert!(m.cov[(i, j)].abs() < 0.05 * 1e-4);
                }
            }
        }
    }
}
