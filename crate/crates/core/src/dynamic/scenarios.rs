//! One-step-ahead joint return scenarios from fitted AG marginals and a t copula.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use super::copula::{CopulaParams, U_CLAMP};
use super::garch::AgFitState;
use super::special::StudentT;
use super::DynamicError;

pub const MIN_SCENARIOS: usize = 1000;
/// Draws per independent random stream.
const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// `S x N` simulated next-day returns.
    pub draws: Vec<Vec<f64>>,
    /// Index of the last row of the window the models were fitted on.
    pub source_window_end: usize,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }
}

/// Draws `s` scenarios. Each block of draws has its own ChaCha stream keyed
/// by `seed`, so the output does not depend on the thread count.
pub fn simulate_scenarios(
    copula: &CopulaParams,
    states: &[AgFitState],
    s: usize,
    seed: u64,
    window_end: usize,
) -> Result<ScenarioSet, DynamicError> {
    if s < MIN_SCENARIOS {
        return Err(DynamicError::TooFewScenarios(s));
    }
    let n = states.len();
    if copula.correlation.nrows() != n || copula.correlation.ncols() != n {
        return Err(DynamicError::DimensionMismatch);
    }
    for st in states {
        st.params.validate()?;
        if !(st.sigma_forecast.is_finite() && st.sigma_forecast > 0.0) {
            return Err(DynamicError::InvalidState(format!(
                "sigma forecast {}",
                st.sigma_forecast
            )));
        }
    }
    let chol = copula
        .correlation
        .clone()
        .cholesky()
        .ok_or(DynamicError::NotPositiveDefinite)?;
    let l = chol.l();
    let nu_c = copula.df;
    let tc = StudentT::new(nu_c);
    let chi = ChiSquared::new(nu_c).map_err(|e| DynamicError::InvalidState(e.to_string()))?;
    let marg: Vec<(StudentT, f64)> = states
        .iter()
        .map(|st| {
            let nu = st.params.nu;
            (StudentT::new(nu), ((nu - 2.0) / nu).sqrt())
        })
        .collect();

    let blocks = s.div_ceil(BLOCK);
    let draws: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows = BLOCK.min(s - b * BLOCK);
            let mut z = vec![0.0; n];
            let mut out = Vec::with_capacity(rows);
            for _ in 0..rows {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..n {
                    z[i] = (0..=i).map(|j| l[(i, j)] * g[j]).sum();
                }
                let w: f64 = chi.sample(&mut rng);
                let scale = (w / nu_c).sqrt();
                let r: Vec<f64> = (0..n)
                    .map(|i| {
                        let u = tc.cdf(z[i] / scale).clamp(U_CLAMP, 1.0 - U_CLAMP);
                        let (t, k) = &marg[i];
                        let eps = t.inv_cdf(u) * k;
                        states[i].mean_forecast + states[i].sigma_forecast * eps
                    })
                    .collect();
                out.push(r);
            }
            out
        })
        .collect();
    Ok(ScenarioSet {
        draws,
        source_window_end: window_end,
        seed,
    })
}
