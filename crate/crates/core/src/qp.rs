//! Dense primal active-set solver for small convex quadratic programs
//!
//! ```text
//! minimize    1/2 x'Qx + c'x
//! subject to  A x = b
//!             lb <= x <= ub
//! ```
//!
//! `Q` must be positive definite on the feasible subspace. The working set
//! only ever contains bound constraints; equalities are handled in the null
//! space of the free columns of `A`. The caller supplies a feasible start.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum QpError {
    #[error("starting point is infeasible (violation {0:.3e})")]
    InfeasibleStart(f64),
    #[error("no convergence after {iterations} iterations (KKT residual {kkt_residual:.3e})")]
    MaxIterations {
        iterations: usize,
        kkt_residual: f64,
    },
    #[error("dimension mismatch in QP data")]
    Dimensions,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            kkt_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Free,
    AtLower,
    AtUpper,
}

/// Orthonormal basis for the null space of `a` (columns).
fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * max.max(1e-300) * n as f64;
    let cols: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= tol)
        .collect();
    DMatrix::from_fn(n, cols.len(), |r, k| eig.eigenvectors[(r, cols[k])])
}

pub fn solve(p: &QpProblem, x0: &DVector<f64>, opts: QpOptions) -> Result<QpSolution, QpError> {
    let n = p.c.len();
    if p.q.nrows() != n
        || p.q.ncols() != n
        || p.a_eq.ncols() != n
        || p.a_eq.nrows() != p.b_eq.len()
        || p.lb.len() != n
        || p.ub.len() != n
        || x0.len() != n
    {
        return Err(QpError::Dimensions);
    }
    // Work on a normalized objective so tolerances are scale free.
    let scale = (0..n)
        .map(|i| p.q[(i, i)].abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let q = &p.q / scale;
    let c = &p.c / scale;

    let bound_tol = 1e-12;
    let eq_violation = (&p.a_eq * x0 - &p.b_eq).amax();
    let bound_violation = (0..n)
        .map(|i| (p.lb[i] - x0[i]).max(x0[i] - p.ub[i]).max(0.0))
        .fold(0.0, f64::max);
    let x_scale = x0.amax().max(1.0);
    if eq_violation > 1e-8 * x_scale || bound_violation > 1e-9 * x_scale {
        return Err(QpError::InfeasibleStart(eq_violation.max(bound_violation)));
    }

    let mut x = x0.clone();
    let mut status: Vec<Status> = (0..n)
        .map(|i| {
            if x[i] <= p.lb[i] + bound_tol {
                Status::AtLower
            } else if x[i] >= p.ub[i] - bound_tol {
                Status::AtUpper
            } else {
                Status::Free
            }
        })
        .collect();
    for i in 0..n {
        match status[i] {
            Status::AtLower => x[i] = p.lb[i],
            Status::AtUpper => x[i] = p.ub[i],
            Status::Free => {}
        }
    }

    let mut kkt = f64::INFINITY;
    for iter in 0..opts.max_iterations {
        let g = &q * &x + &c;
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == Status::Free).collect();
        let a_f = p.a_eq.select_columns(&free);
        let z = null_space(&a_f);

        let g_f = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let mut step = DVector::zeros(free.len());
        let mut reduced_grad = 0.0;
        if z.ncols() > 0 {
            let q_ff = q.select_rows(&free).select_columns(&free);
            let zg = z.transpose() * &g_f;
            reduced_grad = zg.amax();
            let h = z.transpose() * &q_ff * &z;
            let dz = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&zg)),
                None => h
                    .lu()
                    .solve(&(-&zg))
                    .unwrap_or_else(|| DVector::zeros(zg.len())),
            };
            step = &z * dz;
        }

        let step_norm = step.amax();
        if step_norm <= 1e-13 * x.amax().max(1.0) || reduced_grad <= opts.kkt_tolerance * 1e-3 {
            // Stationary on the working set: inspect bound multipliers.
            let lambda = if p.a_eq.nrows() > 0 && !free.is_empty() {
                a_f.transpose()
                    .svd(true, true)
                    .solve(&g_f, 1e-14)
                    .unwrap_or_else(|_| DVector::zeros(p.a_eq.nrows()))
            } else if p.a_eq.nrows() > 0 {
                // Everything fixed: least-squares multipliers over all columns.
                p.a_eq
                    .transpose()
                    .svd(true, true)
                    .solve(&g, 1e-14)
                    .unwrap_or_else(|_| DVector::zeros(p.a_eq.nrows()))
            } else {
                DVector::zeros(0)
            };
            let mu = &g - p.a_eq.transpose() * &lambda;
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                let viol = match status[i] {
                    Status::AtLower => -mu[i],
                    Status::AtUpper => mu[i],
                    Status::Free => 0.0,
                };
                if viol > worst.map_or(0.0, |w| w.1) {
                    worst = Some((i, viol));
                }
            }
            kkt = reduced_grad.max(worst.map_or(0.0, |w| w.1));
            match worst {
                Some((i, v)) if v > opts.kkt_tolerance => status[i] = Status::Free,
                _ => {
                    let objective = scale * (0.5 * x.dot(&(&q * &x)) + c.dot(&x));
                    return Ok(QpSolution {
                        x,
                        objective,
                        iterations: iter + 1,
                        kkt_residual: kkt,
                    });
                }
            }
            continue;
        }

        // Ratio test against the bounds of free variables.
        let mut alpha = 1.0;
        let mut blocking: Option<(usize, Status)> = None;
        for (k, &i) in free.iter().enumerate() {
            let d = step[k];
            if d < 0.0 && p.lb[i].is_finite() {
                let a = (p.lb[i] - x[i]) / d;
                if a < alpha {
                    alpha = a.max(0.0);
                    blocking = Some((i, Status::AtLower));
                }
            } else if d > 0.0 && p.ub[i].is_finite() {
                let a = (p.ub[i] - x[i]) / d;
                if a < alpha {
                    alpha = a.max(0.0);
                    blocking = Some((i, Status::AtUpper));
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] += alpha * step[k];
        }
        if let Some((i, s)) = blocking {
            status[i] = s;
            x[i] = if s == Status::AtLower {
                p.lb[i]
            } else {
                p.ub[i]
            };
        }
    }
    Err(QpError::MaxIterations {
        iterations: opts.max_iterations,
        kkt_residual: kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_problem(q: DMatrix<f64>) -> QpProblem {
        let n = q.nrows();
        QpProblem {
            q,
            c: DVector::zeros(n),
            a_eq: DMatrix::from_element(1, n, 1.0),
            b_eq: DVector::from_element(1, 1.0),
            lb: vec![0.0; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    #[test]
    fn identity_on_simplex_gives_equal_weights() {
        let p = simplex_problem(DMatrix::identity(4, 4));
        let mut x0 = DVector::zeros(4);
        x0[0] = 1.0;
        let s = solve(&p, &x0, QpOptions::default()).unwrap();
        for i in 0..4 {
            assert!((s.x[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_unconstrained_weight_is_clipped() {
        // Strongly correlated pair plus a noisy third asset: the unconstrained
        // minimum shorts asset 1.
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let q = {
            let mut q = q;
            q[(0, 0)] = 2.0;
            q[(0, 1)] = 1.35;
            q[(1, 0)] = 1.35;
            q
        };
        let p = simplex_problem(q.clone());
        let s = solve(
            &p,
            &DVector::from_vec(vec![1.0 / 3.0; 3]),
            QpOptions::default(),
        )
        .unwrap();
        assert!(s.x[0].abs() < 1e-12);
        // brute force over a fine simplex grid
        let mut best = f64::INFINITY;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let w = DVector::from_vec(vec![
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ]);
                best = best.min(0.5 * w.dot(&(&q * &w)));
            }
        }
        assert!(s.objective <= best + 1e-12);
        assert!(s.objective >= best - 1e-4);
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = simplex_problem(DMatrix::identity(2, 2));
        let err = solve(&p, &DVector::from_vec(vec![0.7, 0.7]), QpOptions::default()).unwrap_err();
        assert!(matches!(err, QpError::InfeasibleStart(_)));
    }
}
