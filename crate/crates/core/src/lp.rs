//! Bounded-variable revised simplex for small-row, many-column LPs
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             lb <= x <= ub      (either side may be infinite)
//! ```
//!
//! Two-phase method with one artificial per row. Pricing is Dantzig's rule;
//! after a run of degenerate pivots it falls back to Bland's smallest-index
//! rule, which cannot cycle. The basis is refactored from scratch every
//! iteration, which is cheap because the row count stays small in this crate
//! (one row per asset plus one).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: Vec<f64>,
    /// `m x n`, column-major so column access is contiguous.
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c_j - y'A_j` the reduced cost of column `j`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum LpError {
    #[error("LP is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex did not finish within {0} iterations")]
    MaxIterations(usize),
    #[error("dimension mismatch in LP data")]
    Dimensions,
    #[error("basis matrix became singular")]
    SingularBasis,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
    /// Optional hint: nonbasic columns that should start at their upper bound.
    pub start_at_upper: Option<Vec<bool>>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            bland_after: 50,
            start_at_upper: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column resting at zero.
    Zero,
}

struct Tableau<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    /// Sign of each artificial column.
    art_sign: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            self.p.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = self.art_sign[j - self.n];
            e
        }
    }

    fn col_dot(&self, j: usize, y: &DVector<f64>) -> f64 {
        if j < self.n {
            self.p.a.column(j).dot(y)
        } else {
            self.art_sign[j - self.n] * y[j - self.n]
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(self.m, self.m);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.column(j));
        }
        bm
    }

    fn basis_lu(&self) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, LpError> {
        let lu = self.basis_matrix().lu();
        if !lu.is_invertible() {
            return Err(LpError::SingularBasis);
        }
        Ok(lu)
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh_basics(&mut self, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) {
        let mut rhs = DVector::from_column_slice(&self.p.b);
        for j in 0..self.n + self.m {
            if !matches!(self.state[j], State::Basic(_)) && self.x[j] != 0.0 {
                rhs -= self.column(j) * self.x[j];
            }
        }
        if let Some(xb) = lu.solve(&rhs) {
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] = xb[k];
            }
        }
    }

    fn run(
        &mut self,
        cost: &[f64],
        opts: &LpOptions,
        iters: &mut usize,
    ) -> Result<DVector<f64>, LpError> {
        let total = self.n + self.m;
        let mut degenerate_run = 0usize;
        let cmax = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let dtol = opts.optimality_tol * cmax;
        loop {
            if *iters >= opts.max_iterations {
                return Err(LpError::MaxIterations(*iters));
            }
            let lu = self.basis_lu()?;
            if *iters % 64 == 0 {
                self.refresh_basics(&lu);
            }
            let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| cost[j]));
            let y = self
                .basis_matrix()
                .transpose()
                .lu()
                .solve(&cb)
                .ok_or(LpError::SingularBasis)?;

            let use_bland = degenerate_run >= opts.bland_after;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = cost[j] - self.col_dot(j, &y);
                let eligible = match st {
                    State::Lower => d < -dtol,
                    State::Upper => d > dtol,
                    State::Zero => d.abs() > dtol,
                    State::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                if use_bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((j, d)) = entering else {
                return Ok(y);
            };
            *iters += 1;

            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let u = lu.solve(&self.column(j)).ok_or(LpError::SingularBasis)?;
            let mut theta = self.ub[j] - self.lb[j];
            if !theta.is_finite() {
                theta = f64::INFINITY;
            }
            let mut leave: Option<(usize, bool)> = None; // (basis position, to_upper)
            let mut best_pivot = 0.0;
            for (k, &bj) in self.basis.iter().enumerate() {
                let delta = dir * u[k]; // x_B decreases by theta * delta
                if delta.abs() <= 1e-11 {
                    continue;
                }
                let (limit, to_upper) = if delta > 0.0 {
                    if !self.lb[bj].is_finite() {
                        continue;
                    }
                    (((self.x[bj] - self.lb[bj]) / delta).max(0.0), false)
                } else {
                    if !self.ub[bj].is_finite() {
                        continue;
                    }
                    (((self.ub[bj] - self.x[bj]) / -delta).max(0.0), true)
                };
                let better = limit < theta - 1e-14
                    || (limit <= theta + 1e-14
                        && leave.is_some()
                        && if use_bland {
                            bj < self.basis[leave.unwrap().0]
                        } else {
                            delta.abs() > best_pivot
                        });
                if better {
                    theta = limit;
                    leave = Some((k, to_upper));
                    best_pivot = delta.abs();
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            self.x[j] += dir * theta;
            for (k, &bj) in self.basis.iter().enumerate() {
                self.x[bj] -= dir * theta * u[k];
            }
            match leave {
                None => {
                    // Bound flip of the entering column.
                    self.state[j] = if dir > 0.0 {
                        State::Upper
                    } else {
                        State::Lower
                    };
                    self.x[j] = if dir > 0.0 { self.ub[j] } else { self.lb[j] };
                }
                Some((k, to_upper)) => {
                    let out = self.basis[k];
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
                    self.basis[k] = j;
                    self.state[j] = State::Basic(k);
                }
            }
        }
    }
}

pub fn solve(p: &LpProblem, opts: &LpOptions) -> Result<LpSolution, LpError> {
    let m = p.a.nrows();
    let n = p.a.ncols();
    if p.c.len() != n || p.b.len() != m || p.lb.len() != n || p.ub.len() != n {
        return Err(LpError::Dimensions);
    }
    if p.lb.iter().zip(&p.ub).any(|(l, u)| l > u) {
        return Err(LpError::Infeasible(f64::INFINITY));
    }

    let mut state = Vec::with_capacity(n + m);
    let mut x = Vec::with_capacity(n + m);
    for j in 0..n {
        let hint_upper = opts
            .start_at_upper
            .as_ref()
            .is_some_and(|h| h.get(j).copied().unwrap_or(false));
        let (s, v) = if hint_upper && p.ub[j].is_finite() {
            (State::Upper, p.ub[j])
        } else if p.lb[j].is_finite() {
            (State::Lower, p.lb[j])
        } else if p.ub[j].is_finite() {
            (State::Upper, p.ub[j])
        } else {
            (State::Zero, 0.0)
        };
        state.push(s);
        x.push(v);
    }
    let mut resid = DVector::from_column_slice(&p.b);
    for j in 0..n {
        if x[j] != 0.0 {
            resid -= p.a.column(j) * x[j];
        }
    }
    let art_sign: Vec<f64> = resid
        .iter()
        .map(|r| if *r < 0.0 { -1.0 } else { 1.0 })
        .collect();
    for i in 0..m {
        state.push(State::Basic(i));
        x.push(resid[i].abs());
    }
    let mut lb = p.lb.clone();
    let mut ub = p.ub.clone();
    lb.extend(std::iter::repeat_n(0.0, m));
    ub.extend(std::iter::repeat_n(f64::INFINITY, m));

    let mut t = Tableau {
        p,
        m,
        n,
        art_sign,
        lb,
        ub,
        x,
        state,
        basis: (n..n + m).collect(),
    };
    let mut iters = 0;

    let bscale = p.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    if resid.amax() > 0.0 {
        t.run(&phase1, opts, &mut iters)?;
        let lu = t.basis_lu()?;
        t.refresh_basics(&lu);
        let infeas: f64 = (n..n + m).map(|j| t.x[j].abs()).sum();
        if infeas > opts.feasibility_tol * bscale * m as f64 {
            return Err(LpError::Infeasible(infeas));
        }
    }
    // Artificials are pinned at zero for phase two.
    for j in n..n + m {
        t.ub[j] = 0.0;
        if !matches!(t.state[j], State::Basic(_)) {
            t.state[j] = State::Lower;
            t.x[j] = 0.0;
        }
    }
    let mut cost = p.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    let y = t.run(&cost, opts, &mut iters)?;
    let lu = t.basis_lu()?;
    t.refresh_basics(&lu);

    let xs: Vec<f64> = t.x[..n]
        .iter()
        .enumerate()
        .map(|(j, v)| v.clamp(p.lb[j], p.ub[j]))
        .collect();
    let objective = xs.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x: xs,
        objective,
        duals: y.iter().copied().collect(),
        iterations: iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64], lb: &[f64], ub: &[f64]) -> LpProblem {
        let m = rows.len();
        let n = c.len();
        LpProblem {
            c: c.to_vec(),
            a: DMatrix::from_fn(m, n, |i, j| rows[i][j]),
            b: b.to_vec(),
            lb: lb.to_vec(),
            ub: ub.to_vec(),
        }
    }

    const INF: f64 = f64::INFINITY;

    #[test]
    fn small_textbook_problem() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3 ; slacks s1, s2
        let p = lp(
            &[-3.0, -2.0, 0.0, 0.0],
            &[&[1.0, 1.0, 1.0, 0.0], &[1.0, 3.0, 0.0, 1.0]],
            &[4.0, 6.0],
            &[0.0; 4],
            &[3.0, INF, INF, INF],
        );
        let s = solve(&p, &LpOptions::default()).unwrap();
        assert!((s.objective + 11.0).abs() < 1e-10, "{s:?}");
        assert!((s.x[0] - 3.0).abs() < 1e-10 && (s.x[1] - 1.0).abs() < 1e-10);
        // dual feasibility: reduced costs of nonbasic columns have the right sign
        let y = DVector::from_vec(s.duals.clone());
        let d1 = p.c[2] - p.a.column(2).dot(&y);
        assert!(d1 <= 1e-10);
    }

    #[test]
    fn free_variable_and_equality() {
        // min |t| style: min u s.t. u - z = 0 ... use z free: min z s.t. z - x = -2, x in [0,5]
        let p = lp(
            &[1.0, 0.0],
            &[&[1.0, -1.0]],
            &[-2.0],
            &[-INF, 0.0],
            &[INF, 5.0],
        );
        let s = solve(&p, &LpOptions::default()).unwrap();
        assert!((s.x[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let p = lp(
            &[1.0, 1.0],
            &[&[1.0, 1.0]],
            &[5.0],
            &[0.0, 0.0],
            &[1.0, 1.0],
        );
        assert!(matches!(
            solve(&p, &LpOptions::default()),
            Err(LpError::Infeasible(_))
        ));
        let p = lp(
            &[-1.0, 0.0],
            &[&[1.0, -1.0]],
            &[0.0],
            &[0.0, 0.0],
            &[INF, INF],
        );
        assert_eq!(
            solve(&p, &LpOptions::default()).unwrap_err(),
            LpError::Unbounded
        );
    }

    #[test]
    fn degenerate_problem_terminates_with_bland() {
        // Beale's cycling example in equality form with slacks.
        let p = lp(
            &[-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
            &[
                &[0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                &[0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            &[0.0, 0.0, 1.0],
            &[0.0; 7],
            &[INF; 7],
        );
        let opts = LpOptions {
            bland_after: 0,
            ..LpOptions::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-10, "{}", s.objective);
        let s = solve(&p, &LpOptions::default()).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-10);
    }
}
