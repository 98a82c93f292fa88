//! Student-t copula: probability-integral transform of AG residuals,
//! rank-correlation fit, and degrees of freedom by profile likelihood.

use nalgebra::{DMatrix, SymmetricEigen};

use super::garch::AgFitState;
use super::special::{ln_gamma, StudentT};
use super::DynamicError;

pub const U_CLAMP: f64 = 1e-10;
pub const DF_MIN: f64 = 2.1;
pub const DF_MAX: f64 = 50.0;
/// Largest off-diagonal correlation magnitude kept after projection.
pub const RHO_CAP: f64 = 1.0 - 1e-8;
pub const MIN_OBSERVATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaParams {
    pub correlation: DMatrix<f64>,
    pub df: f64,
}

/// Unit-variance t scale factor `sqrt(nu / (nu - 2))`.
fn unit_scale(nu: f64) -> f64 {
    (nu / (nu - 2.0)).sqrt()
}

/// `u_t = F_nu(eps_t sqrt(nu / (nu - 2)))`, clamped away from 0 and 1.
pub fn copula_transform(state: &AgFitState) -> Result<Vec<f64>, DynamicError> {
    state.params.validate()?;
    let nu = state.params.nu;
    let t = StudentT::new(nu);
    let k = unit_scale(nu);
    Ok(state
        .std_residuals
        .iter()
        .map(|e| t.cdf(e * k).clamp(U_CLAMP, 1.0 - U_CLAMP))
        .collect())
}

/// Standardized innovation for a uniform: the inverse of [`copula_transform`].
pub fn inverse_transform(u: f64, nu: f64) -> f64 {
    StudentT::new(nu).inv_cdf(u) / unit_scale(nu)
}

/// Counts inversions while merge-sorting `v`.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (x[i], y[i])).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let num = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Nearest correlation matrix by eigenvalue clipping and diagonal
/// rescaling, with off-diagonals capped at `RHO_CAP`.
pub fn nearest_correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>, DynamicError> {
    let n = m.nrows();
    let mut floor = 1e-10;
    for _ in 0..8 {
        let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
        let clipped = eig.eigenvalues.map(|v| v.max(floor));
        let mut r =
            &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let d: Vec<f64> = (0..n).map(|i| r[(i, i)].sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] = if i == j {
                    1.0
                } else {
                    (r[(i, j)] / (d[i] * d[j])).clamp(-RHO_CAP, RHO_CAP)
                };
            }
        }
        let r = (&r + r.transpose()) * 0.5;
        if r.clone().cholesky().is_some() {
            return Ok(r);
        }
        floor *= 100.0;
    }
    Err(DynamicError::NotPositiveDefinite)
}

/// Pseudo log-likelihood of the t copula with correlation `r` and `df`
/// degrees of freedom on uniforms `u` (`T x N`).
pub fn copula_loglik(u: &[Vec<f64>], r: &DMatrix<f64>, df: f64) -> Result<f64, DynamicError> {
    let n = r.nrows();
    let chol = r
        .clone()
        .cholesky()
        .ok_or(DynamicError::NotPositiveDefinite)?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let t = StudentT::new(df);
    let nf = n as f64;
    let c = ln_gamma(0.5 * (df + nf))
        - ln_gamma(0.5 * df)
        - 0.5 * nf * (df * std::f64::consts::PI).ln()
        - 0.5 * ln_det;
    let mut ll = 0.0;
    let mut x = nalgebra::DVector::zeros(n);
    for row in u {
        let mut marg = 0.0;
        for i in 0..n {
            x[i] = t.inv_cdf(row[i]);
            marg += t.ln_pdf(x[i]);
        }
        let y = chol
            .l()
            .solve_lower_triangular(&x)
            .ok_or(DynamicError::NotPositiveDefinite)?;
        ll += c - 0.5 * (df + nf) * (y.norm_squared() / df).ln_1p() - marg;
    }
    Ok(ll)
}

/// Fits a t copula to `T x N` uniforms: correlation from Kendall's tau via
/// `rho = sin(pi tau / 2)`, then df by golden-section search on `[2.1, 50]`.
pub fn fit_copula(uniforms: &[Vec<f64>]) -> Result<CopulaParams, DynamicError> {
    let t = uniforms.len();
    if t < MIN_OBSERVATIONS {
        return Err(DynamicError::TooShort {
            needed: MIN_OBSERVATIONS,
            got: t,
        });
    }
    let n = uniforms[0].len();
    if uniforms.iter().any(|r| r.len() != n) {
        return Err(DynamicError::DimensionMismatch);
    }
    if uniforms.iter().flatten().any(|u| !(*u > 0.0 && *u < 1.0)) {
        return Err(DynamicError::UniformOutOfRange);
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|i| uniforms.iter().map(|r| r[i]).collect())
        .collect();
    let mut raw = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let tau = kendall_tau(&cols[i], &cols[j]);
            let rho = (std::f64::consts::FRAC_PI_2 * tau).sin();
            raw[(i, j)] = rho;
            raw[(j, i)] = rho;
        }
    }
    let correlation = nearest_correlation(&raw)?;
    if n == 1 {
        return Ok(CopulaParams {
            correlation,
            df: DF_MAX,
        });
    }

    // Golden section on ln(df); the profile is flat for large df, so the
    // log scale spends evaluations where the likelihood moves.
    let f =
        |lnv: f64| copula_loglik(uniforms, &correlation, lnv.exp()).unwrap_or(f64::NEG_INFINITY);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (DF_MIN.ln(), DF_MAX.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-3 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (a + b)).exp();
    // the bracket ends are candidates too when the profile is monotone
    let fb = f(best.ln());
    for edge in [DF_MIN, DF_MAX] {
        if f(edge.ln()) > fb {
            best = edge;
        }
    }
    Ok(CopulaParams {
        correlation,
        df: best,
    })
}
