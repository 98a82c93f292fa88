//! ARMA(1,1)-GARCH(1,1) with standardized Student-t innovations:
//!
//! ```text
//! r_t       = delta0 + ar1 r_{t-1} + a_t + ma1 a_{t-1}
//! a_t       = sigma_t eps_t,  eps_t ~ t_nu scaled to unit variance
//! sigma_t^2 = alpha0 + alpha1 a_{t-1}^2 + beta1 sigma_{t-1}^2
//! ```
//!
//! The recursion starts from the sample mean, `a_0 = 0` and the sample
//! variance. Estimation is by maximum likelihood on standardized returns
//! with Nelder-Mead over an unconstrained reparametrization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::nelder_mead::{self, NmOptions};
use super::special::ln_gamma;
use super::DynamicError;

pub const MIN_OBSERVATIONS: usize = 500;
pub const NU_MIN: f64 = 2.1;
pub const NU_MAX: f64 = 50.0;
/// Persistence above this is reported as a boundary estimate.
pub const BOUNDARY_PERSISTENCE: f64 = 0.999;
const PERSISTENCE_CAP: f64 = 1.0 - 1e-6;
const ARMA_CAP: f64 = 0.999;
const N_STARTS: usize = 8;
/// 95% point of chi-square with one degree of freedom.
const LR_CRITICAL: f64 = 3.841_458_820_694_124;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgParams {
    pub delta0: f64,
    pub ar1: f64,
    pub ma1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub nu: f64,
    pub loglik: f64,
}

impl AgParams {
    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta1
    }

    pub fn validate(&self) -> Result<(), DynamicError> {
        let ok = self.alpha0 > 0.0
            && self.alpha1 >= 0.0
            && self.beta1 >= 0.0
            && self.alpha1 + self.beta1 < 1.0
            && self.ar1.abs() < 1.0
            && self.nu > 2.0
            && [self.delta0, self.ma1, self.alpha0]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(DynamicError::InvalidState(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgFitState {
    pub params: AgParams,
    /// `a_t / sigma_t` over the fitted window.
    pub std_residuals: Vec<f64>,
    /// One-step-ahead conditional standard deviation.
    pub sigma_forecast: f64,
    /// One-step-ahead conditional mean.
    pub mean_forecast: f64,
    /// Final simplex search met its tolerance.
    pub converged: bool,
    /// `alpha1 + beta1 > 0.999`.
    pub boundary: bool,
    /// `nu` within 0.1 of its upper search bound.
    pub nu_at_upper: bool,
    pub(crate) last_return: f64,
    pub(crate) last_shock: f64,
}

impl AgFitState {
    /// Advances the filter by one observed return with parameters held
    /// fixed, refreshing the one-step forecasts.
    pub fn update(&mut self, r: f64) {
        let p = &self.params;
        let a = r - self.mean_forecast;
        let s2 = self.sigma_forecast * self.sigma_forecast;
        self.mean_forecast = p.delta0 + p.ar1 * r + p.ma1 * a;
        self.sigma_forecast = (p.alpha0 + p.alpha1 * a * a + p.beta1 * s2).sqrt();
        self.last_return = r;
        self.last_shock = a;
    }

    pub fn last_return(&self) -> f64 {
        self.last_return
    }

    pub fn last_shock(&self) -> f64 {
        self.last_shock
    }
}

struct Filtered {
    loglik: f64,
    shocks: Vec<f64>,
    sigma2: Vec<f64>,
    next_mean: f64,
    next_sigma2: f64,
}

fn t_constant(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln()
}

/// Log-likelihood only; the hot path of the optimizer.
fn loglik_only(x: &[f64], p: &AgParams, init_mean: f64, init_var: f64) -> f64 {
    let c = t_constant(p.nu);
    let k = 0.5 * (p.nu + 1.0);
    let scale = 1.0 / (p.nu - 2.0);
    let (mut r_prev, mut a_prev, mut s2_prev) = (init_mean, 0.0, init_var);
    let mut ll = 0.0;
    for &r in x {
        let a = r - (p.delta0 + p.ar1 * r_prev + p.ma1 * a_prev);
        let s2 = p.alpha0 + p.alpha1 * a_prev * a_prev + p.beta1 * s2_prev;
        ll += -0.5 * s2.ln() - k * (a * a * scale / s2).ln_1p();
        r_prev = r;
        a_prev = a;
        s2_prev = s2;
    }
    ll + c * x.len() as f64
}

fn filter(x: &[f64], p: &AgParams, init_mean: f64, init_var: f64) -> Filtered {
    let c = t_constant(p.nu);
    let k = 0.5 * (p.nu + 1.0);
    let (mut r_prev, mut a_prev, mut s2_prev) = (init_mean, 0.0, init_var);
    let mut shocks = Vec::with_capacity(x.len());
    let mut sigma2 = Vec::with_capacity(x.len());
    let mut ll = 0.0;
    for &r in x {
        let a = r - (p.delta0 + p.ar1 * r_prev + p.ma1 * a_prev);
        let s2 = p.alpha0 + p.alpha1 * a_prev * a_prev + p.beta1 * s2_prev;
        ll += c - 0.5 * s2.ln() - k * (a * a / (s2 * (p.nu - 2.0))).ln_1p();
        shocks.push(a);
        sigma2.push(s2);
        r_prev = r;
        a_prev = a;
        s2_prev = s2;
    }
    Filtered {
        loglik: ll,
        shocks,
        sigma2,
        next_mean: p.delta0 + p.ar1 * r_prev + p.ma1 * a_prev,
        next_sigma2: p.alpha0 + p.alpha1 * a_prev * a_prev + p.beta1 * s2_prev,
    }
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Log-likelihood of `returns` under `params`, with the recursion started
/// from the sample mean and variance of `returns`.
pub fn ag_loglik(returns: &[f64], params: &AgParams) -> f64 {
    let (m, v) = moments(returns);
    loglik_only(returns, params, m, v)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: `[d0, atanh(ar1), atanh(ma1), logit(persistence),
/// logit(alpha1 share), ln(alpha0), logit(nu position)]`. With `restricted`
/// the share is fixed at one, so `beta1 = 0`.
#[derive(Clone, Copy)]
struct Coding {
    restricted: bool,
}

impl Coding {
    fn dim(self) -> usize {
        if self.restricted {
            6
        } else {
            7
        }
    }

    fn decode(self, p: &[f64]) -> AgParams {
        let persistence = PERSISTENCE_CAP * sigmoid(p[3]);
        let (share, rest) = if self.restricted {
            (1.0, &p[4..])
        } else {
            (sigmoid(p[4]), &p[5..])
        };
        AgParams {
            delta0: p[0],
            ar1: ARMA_CAP * p[1].tanh(),
            ma1: ARMA_CAP * p[2].tanh(),
            alpha0: rest[0].exp(),
            alpha1: persistence * share,
            beta1: persistence * (1.0 - share),
            nu: NU_MIN + (NU_MAX - NU_MIN) * sigmoid(rest[1]),
            loglik: f64::NAN,
        }
    }

    fn encode(self, a: &AgParams) -> Vec<f64> {
        let clamp = |v: f64, lo: f64, hi: f64| v.clamp(lo, hi);
        let persistence = clamp((a.alpha1 + a.beta1) / PERSISTENCE_CAP, 1e-6, 1.0 - 1e-9);
        let mut v = vec![
            a.delta0,
            clamp(a.ar1 / ARMA_CAP, -0.999_999, 0.999_999).atanh(),
            clamp(a.ma1 / ARMA_CAP, -0.999_999, 0.999_999).atanh(),
            logit(persistence),
        ];
        if !self.restricted {
            let share = clamp(a.alpha1 / (a.alpha1 + a.beta1).max(1e-12), 1e-6, 1.0 - 1e-6);
            v.push(logit(share));
        }
        v.push(a.alpha0.max(1e-300).ln());
        v.push(logit(clamp(
            (a.nu - NU_MIN) / (NU_MAX - NU_MIN),
            1e-9,
            1.0 - 1e-9,
        )));
        v
    }
}

struct Candidate {
    raw: Vec<f64>,
    nll: f64,
    converged: bool,
}

fn search(z: &[f64], coding: Coding, starts: &[Vec<f64>]) -> Candidate {
    let objective = |p: &[f64]| {
        let prm = coding.decode(p);
        let ll = loglik_only(z, &prm, 0.0, 1.0);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let step = vec![0.3; coding.dim()];
    let opts = NmOptions {
        max_evaluations: 3000,
        f_tol: 1e-10,
        x_tol: 1e-7,
    };
    let mut best: Option<Candidate> = None;
    for s in starts {
        let r = nelder_mead::minimize(objective, s, &step, opts);
        if best.as_ref().is_none_or(|b| r.value < b.nll) {
            best = Some(Candidate {
                raw: r.x,
                nll: r.value,
                converged: r.converged,
            });
        }
    }
    let best = best.expect("at least one start");
    // Restart from the best vertex with a fresh simplex to escape collapse.
    let small = vec![0.05; coding.dim()];
    let polish = nelder_mead::minimize(
        objective,
        &best.raw,
        &small,
        NmOptions {
            max_evaluations: 4000,
            ..opts
        },
    );
    if polish.value <= best.nll {
        Candidate {
            raw: polish.x,
            nll: polish.value,
            converged: polish.converged,
        }
    } else {
        best
    }
}

fn default_start() -> AgParams {
    AgParams {
        delta0: 0.0,
        ar1: 0.0,
        ma1: 0.0,
        alpha0: 0.05,
        alpha1: 0.08,
        beta1: 0.87,
        nu: 8.0,
        loglik: f64::NAN,
    }
}

fn jittered_starts(coding: Coding, centre: &AgParams, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = coding.encode(centre);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = vec![base.clone()];
    while out.len() < count {
        let scale = |i: usize| if i == 0 { 0.05 } else { 0.8 };
        out.push(
            base.iter()
                .enumerate()
                .map(|(i, v)| v + scale(i) * normal.sample(&mut rng))
                .collect(),
        );
    }
    out
}

/// Maximum-likelihood fit from eight jittered starts.
pub fn fit_ag(returns: &[f64]) -> Result<AgFitState, DynamicError> {
    fit_ag_from(returns, None)
}

/// Fit warm-started at `previous` (in return units) when given, otherwise
/// from eight jittered default starts.
pub fn fit_ag_from(
    returns: &[f64],
    previous: Option<&AgParams>,
) -> Result<AgFitState, DynamicError> {
    let n = returns.len();
    if n < MIN_OBSERVATIONS {
        return Err(DynamicError::TooShort {
            needed: MIN_OBSERVATIONS,
            got: n,
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(DynamicError::InvalidState("non-finite return".into()));
    }
    let (m, v) = moments(returns);
    let s = v.sqrt();
    if !(s > 1e-12 * m.abs().max(1e-300)) || s == 0.0 {
        return Err(DynamicError::ZeroVariance);
    }
    let z: Vec<f64> = returns.iter().map(|r| (r - m) / s).collect();

    let full = Coding { restricted: false };
    let starts = match previous {
        Some(p) => {
            let mut zp = *p;
            zp.delta0 = (p.delta0 - m * (1.0 - p.ar1)) / s;
            zp.alpha0 = p.alpha0 / v;
            vec![full.encode(&zp), full.encode(&default_start())]
        }
        None => jittered_starts(full, &default_start(), N_STARTS, 0x5eed_a6),
    };
    let mut best = search(&z, full, &starts);
    let mut prm = full.decode(&best.raw);

    // With negligible ARCH response the GARCH term is not identified: the
    // likelihood is flat in beta1. Prefer beta1 = 0 unless the data reject it.
    if prm.alpha1 < 0.05 {
        let restricted = Coding { restricted: true };
        let mut centre = prm;
        centre.beta1 = 0.0;
        centre.alpha0 = (1.0 - centre.alpha1).max(1e-3);
        let alt = search(&z, restricted, &[restricted.encode(&centre)]);
        if 2.0 * (alt.nll - best.nll) < LR_CRITICAL {
            best = alt;
            prm = restricted.decode(&best.raw);
        }
    }

    // back to return units
    let mut params = prm;
    params.delta0 = m * (1.0 - prm.ar1) + s * prm.delta0;
    params.alpha0 = prm.alpha0 * v;
    let f = filter(returns, &params, m, v);
    params.loglik = f.loglik;
    let std_residuals = f
        .shocks
        .iter()
        .zip(&f.sigma2)
        .map(|(a, s2)| a / s2.sqrt())
        .collect();
    let state = AgFitState {
        params,
        std_residuals,
        sigma_forecast: f.next_sigma2.sqrt(),
        mean_forecast: f.next_mean,
        converged: best.converged,
        boundary: params.persistence() > BOUNDARY_PERSISTENCE,
        nu_at_upper: params.nu > NU_MAX - 0.1,
        last_return: returns[n - 1],
        last_shock: f.shocks[n - 1],
    };
    if !state.converged {
        log::debug!("AG fit stopped at the evaluation cap: {params:?}");
    }
    Ok(state)
}

/// Simulates `n` returns after discarding `burn_in` draws. The recursion
/// starts at the unconditional mean and variance.
pub fn simulate_ag(params: &AgParams, n: usize, burn_in: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rand_distr::StudentT::new(params.nu).expect("nu > 0");
    let unit = ((params.nu - 2.0) / params.nu).sqrt();
    let mut r_prev = params.delta0 / (1.0 - params.ar1);
    let mut a_prev = 0.0;
    let mut s2_prev = params.alpha0 / (1.0 - params.alpha1 - params.beta1).max(1e-6);
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn_in {
        let s2 = params.alpha0 + params.alpha1 * a_prev * a_prev + params.beta1 * s2_prev;
        let a = s2.sqrt() * unit * t.sample(&mut rng);
        let r = params.delta0 + params.ar1 * r_prev + a + params.ma1 * a_prev;
        if i >= burn_in {
            out.push(r);
        }
        r_prev = r;
        a_prev = a;
        s2_prev = s2;
    }
    out
}
