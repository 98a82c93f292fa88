//! Dynamic scenario engine: per-asset ARMA(1,1)-GARCH(1,1) marginals with
//! Student-t innovations, joined by a Student-t copula.

pub mod copula;
pub mod garch;
pub mod nelder_mead;
pub mod scenarios;
pub mod special;

use rayon::prelude::*;

pub use copula::{copula_transform, fit_copula, CopulaParams};
pub use garch::{fit_ag, fit_ag_from, AgFitState, AgParams};
pub use scenarios::{simulate_scenarios, ScenarioSet};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DynamicError {
    #[error("series too short: need {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("invalid model state: {0}")]
    InvalidState(String),
    #[error("correlation matrix could not be made positive definite")]
    NotPositiveDefinite,
    #[error("{0} scenarios requested, at least 1000 required")]
    TooFewScenarios(usize),
    #[error("dimension mismatch between copula and marginals")]
    DimensionMismatch,
    #[error("copula input outside (0, 1)")]
    UniformOutOfRange,
    #[error("asset {index}: {source}")]
    Asset {
        index: usize,
        source: Box<DynamicError>,
    },
}

/// Fits every column independently (warm-started from `previous` when
/// given), then the copula on the transformed residuals.
pub fn fit_joint(
    columns: &[Vec<f64>],
    previous: Option<&[AgFitState]>,
) -> Result<(Vec<AgFitState>, CopulaParams), DynamicError> {
    let states: Vec<AgFitState> = columns
        .par_iter()
        .enumerate()
        .map(|(i, col)| {
            let prev = previous.and_then(|p| p.get(i)).map(|s| &s.params);
            fit_ag_from(col, prev).map_err(|e| DynamicError::Asset {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let u_cols: Vec<Vec<f64>> = states
        .iter()
        .map(copula_transform)
        .collect::<Result<_, _>>()?;
    let t = u_cols.first().map_or(0, Vec::len);
    let uniforms: Vec<Vec<f64>> = (0..t)
        .map(|r| u_cols.iter().map(|c| c[r]).collect())
        .collect();
    let cop = fit_copula(&uniforms)?;
    Ok((states, cop))
}

/// Rolling driver. Refits marginals and copula every `refit_every` days;
/// between refits the filters are advanced with parameters held fixed.
#[derive(Debug, Clone)]
pub struct DynamicEngine {
    pub scenario_count: usize,
    pub refit_every: usize,
    pub seed: u64,
    states: Vec<AgFitState>,
    copula: Option<CopulaParams>,
    fitted_at: usize,
    through: usize,
    refitted: bool,
}

impl DynamicEngine {
    pub fn new(scenario_count: usize, refit_every: usize, seed: u64) -> Self {
        Self {
            scenario_count,
            refit_every: refit_every.max(1),
            seed,
            states: vec![],
            copula: None,
            fitted_at: 0,
            through: 0,
            refitted: false,
        }
    }

    pub fn states(&self) -> &[AgFitState] {
        &self.states
    }

    pub fn copula(&self) -> Option<&CopulaParams> {
        self.copula.as_ref()
    }

    /// Whether the last call to [`Self::scenarios_for`] refitted the models.
    pub fn refitted(&self) -> bool {
        self.refitted
    }

    /// Scenarios for day `t` of `rows` (`T x N`). Only rows
    /// `[t - window, t - 1]` are read.
    pub fn scenarios_for(
        &mut self,
        rows: &[Vec<f64>],
        t: usize,
        window: usize,
    ) -> Result<ScenarioSet, DynamicError> {
        if t < window || t > rows.len() {
            return Err(DynamicError::TooShort {
                needed: window,
                got: t,
            });
        }
        let sequential =
            self.copula.is_some() && self.through <= t && t - self.fitted_at < self.refit_every;
        self.refitted = !sequential;
        if sequential {
            for row in &rows[self.through..t] {
                for (s, r) in self.states.iter_mut().zip(row) {
                    s.update(*r);
                }
            }
        } else {
            let n = rows.first().map_or(0, Vec::len);
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|i| rows[t - window..t].iter().map(|r| r[i]).collect())
                .collect();
            let prev = if self.states.len() == n {
                Some(self.states.as_slice())
            } else {
                None
            };
            match fit_joint(&cols, prev) {
                Ok((states, cop)) => {
                    self.states = states;
                    self.copula = Some(cop);
                    self.fitted_at = t;
                }
                Err(e) => {
                    self.states.clear();
                    self.copula = None;
                    return Err(e);
                }
            }
        }
        self.through = t;
        let day_seed = self.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let cop = self
            .copula
            .as_ref()
            .ok_or(DynamicError::NotPositiveDefinite)?;
        simulate_scenarios(cop, &self.states, self.scenario_count, day_seed, t - 1)
    }
}
