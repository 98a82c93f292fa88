//! Huber M-estimation of `y = alpha + beta x + e` by iteratively reweighted
//! least squares, with sandwich standard errors.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::market_data::ReturnPanel;
use crate::stats::{median, ols_line};

pub const DEFAULT_TUNING: f64 = 1.345;
/// Consistency factor of the median absolute deviation under normality.
pub const MAD_SCALE: f64 = 1.4826;
const MAX_ITER: usize = 200;
const COEF_TOL: f64 = 1e-10;
const Z_975: f64 = 1.959963984540054;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least 3 observations, got {0}")]
    TooShort(usize),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("regressor has zero variance")]
    DegenerateX,
    #[error("tuning constant must be positive")]
    BadTuning,
    #[error("{ticker}: {source}")]
    Column {
        ticker: String,
        source: Box<RegressionError>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustFit {
    pub alpha: f64,
    pub beta: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub ci95_alpha: (f64, f64),
    pub ci95_beta: (f64, f64),
    pub n_obs: usize,
    /// Robust residual scale (normalized MAD) at the final iterate.
    pub scale: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; estimates are the last iterate.
    pub converged: bool,
}

fn mad_scale(res: &[f64]) -> f64 {
    let m = median(res);
    let dev: Vec<f64> = res.iter().map(|r| (r - m).abs()).collect();
    MAD_SCALE * median(&dev)
}

fn weighted_line(y: &[f64], x: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

pub fn huber_fit(y: &[f64], x: &[f64], tuning: f64) -> Result<RobustFit, RegressionError> {
    if y.len() != x.len() {
        return Err(RegressionError::LengthMismatch(y.len(), x.len()));
    }
    let n = y.len();
    if n < 3 {
        return Err(RegressionError::TooShort(n));
    }
    if !(tuning > 0.0) {
        return Err(RegressionError::BadTuning);
    }
    let (mut alpha, mut beta) = ols_line(y, x).ok_or(RegressionError::DegenerateX)?;
    let resid =
        |a: f64, b: f64| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi - a - b * xi).collect() };

    let mut res = resid(alpha, beta);
    let mut scale = mad_scale(&res);
    let mut converged = false;
    let mut iterations = 0;
    let mut w = vec![1.0; n];
    for it in 0..MAX_ITER {
        iterations = it + 1;
        if scale <= 0.0 {
            // At least half of the points sit on the line: nothing to reweight.
            converged = true;
            break;
        }
        for i in 0..n {
            let a = res[i].abs();
            w[i] = if a <= tuning * scale {
                1.0
            } else {
                tuning * scale / a
            };
        }
        let (na, nb) = weighted_line(y, x, &w).ok_or(RegressionError::DegenerateX)?;
        let change = (na - alpha).abs().max((nb - beta).abs());
        alpha = na;
        beta = nb;
        res = resid(alpha, beta);
        scale = mad_scale(&res);
        if change < COEF_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Huber IRLS hit {MAX_ITER} iterations without converging");
    }

    let (se_alpha, se_beta) = if scale > 0.0 {
        let mut bmat = Matrix2::zeros();
        let mut mmat = Matrix2::zeros();
        for i in 0..n {
            let u = res[i] / scale;
            let psi = u.clamp(-tuning, tuning);
            let dpsi = if u.abs() <= tuning { 1.0 } else { 0.0 };
            let xi = Vector2::new(1.0, x[i]);
            let outer = xi * xi.transpose();
            bmat += outer * dpsi;
            mmat += outer * (psi * psi);
        }
        match bmat.try_inverse() {
            Some(binv) => {
                let cov = binv * mmat * binv * (scale * scale) * (n as f64 / (n as f64 - 2.0));
                (cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt())
            }
            None => (f64::NAN, f64::NAN),
        }
    } else {
        (0.0, 0.0)
    };
    Ok(RobustFit {
        alpha,
        beta,
        se_alpha,
        se_beta,
        ci95_alpha: (alpha - Z_975 * se_alpha, alpha + Z_975 * se_alpha),
        ci95_beta: (beta - Z_975 * se_beta, beta + Z_975 * se_beta),
        n_obs: n,
        scale,
        iterations,
        converged,
    })
}

/// One fit per panel column against `benchmark`, in column order.
pub fn benchmark_panel_fit(
    panel: &ReturnPanel,
    benchmark: &[f64],
    tuning: f64,
) -> Result<Vec<RobustFit>, RegressionError> {
    if benchmark.len() != panel.len() {
        return Err(RegressionError::LengthMismatch(
            panel.len(),
            benchmark.len(),
        ));
    }
    (0..panel.n_assets())
        .into_par_iter()
        .map(|i| {
            huber_fit(&panel.column(i), benchmark, tuning).map_err(|e| RegressionError::Column {
                ticker: panel.tickers[i].clone(),
                source: Box::new(e),
            })
        })
        .collect()
}
