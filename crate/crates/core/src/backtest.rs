//! Daily rolling-window backtest over every configured strategy.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::{max_starr_portfolio, min_cvar_portfolio, CvarProblem};
use crate::dynamic::{AgParams, DynamicEngine};
use crate::market_data::{align_riskfree, DataError, ReturnPanel, RiskFreeSeries};
use crate::mean_variance::{
    estimate_moments, min_variance_portfolio, tangency_portfolio, MomentEstimates, OptimError,
};
use crate::portfolio::{
    equal_weights, Regime, StrategyFamily, StrategySpec, WeightVector, DEFAULT_BOX_BOUND,
    DEFAULT_GROSS_BOUND,
};
use crate::risk_metrics::RatioReport;

pub const MIN_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Moments and scenarios straight from the trailing window.
    #[default]
    Historical,
    /// AG marginals and t copula fitted on the window, scenarios simulated.
    Dynamic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Historical => "historical",
            Mode::Dynamic => "dynamic",
        })
    }
}

impl FromStr for Mode {
    type Err = BacktestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "historical" => Ok(Mode::Historical),
            "dynamic" => Ok(Mode::Dynamic),
            _ => Err(BacktestError::InvalidConfig(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(String),
    #[error("panel has {rows} rows; a {window}-day window needs at least {}", window + 1)]
    PanelTooShort { rows: usize, window: usize },
    #[error("results do not share a date axis")]
    DateAxisMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub window_length: usize,
    pub strategies: Vec<StrategySpec>,
    pub mode: Mode,
    /// Simulated scenarios per day in dynamic mode.
    pub scenario_count: usize,
    pub seed: u64,
    /// Dynamic mode: refit marginals and copula every this many days.
    pub refit_every: usize,
    pub initial: f64,
    /// Long-short box for the CVaR families.
    pub box_bound: f64,
    /// Long-short weights with some `|w_i|` above this are rejected and the
    /// previous weights kept.
    pub gross_bound: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window_length: 1008,
            strategies: StrategySpec::standard_set(),
            mode: Mode::Historical,
            scenario_count: 10_000,
            seed: 0,
            refit_every: 1,
            initial: 100.0,
            box_bound: DEFAULT_BOX_BOUND,
            gross_bound: DEFAULT_GROSS_BOUND,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: String| Err(BacktestError::InvalidConfig(m));
        if self.window_length < MIN_WINDOW {
            return bad(format!(
                "window_length {} < {MIN_WINDOW}",
                self.window_length
            ));
        }
        if self.strategies.is_empty() {
            return bad("no strategies".into());
        }
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return bad(format!("initial value {}", self.initial));
        }
        if !(self.box_bound > 0.0) {
            return bad(format!("box_bound {}", self.box_bound));
        }
        if !(self.gross_bound >= self.box_bound) {
            return bad(format!(
                "gross_bound {} below box_bound {}",
                self.gross_bound, self.box_bound
            ));
        }
        if self.mode == Mode::Dynamic
            && self.window_length < crate::dynamic::garch::MIN_OBSERVATIONS
        {
            return bad(format!(
                "window_length {} is too short for the dynamic model, which needs {}",
                self.window_length,
                crate::dynamic::garch::MIN_OBSERVATIONS
            ));
        }
        if self.mode == Mode::Dynamic
            && self.scenario_count < crate::dynamic::scenarios::MIN_SCENARIOS
        {
            return bad(format!(
                "scenario_count {} < {}",
                self.scenario_count,
                crate::dynamic::scenarios::MIN_SCENARIOS
            ));
        }
        if self.refit_every == 0 {
            return bad("refit_every must be positive".into());
        }
        Ok(())
    }
}

/// A day on which a strategy kept its previous weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WarningEvent {
    pub date: NaiveDate,
    pub strategy: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub strategy: StrategySpec,
    pub dates: Vec<NaiveDate>,
    pub weights: Vec<WeightVector>,
    pub returns: Vec<f64>,
    pub prices: Vec<f64>,
    pub warnings: Vec<WarningEvent>,
}

/// Marginal parameters and copula df estimated on the window ending at `date`.
#[derive(Debug, Clone)]
pub struct FitRecord {
    pub date: NaiveDate,
    pub params: Vec<AgParams>,
    pub copula_df: f64,
}

#[derive(Debug, Clone)]
pub struct BacktestRun {
    pub mode: Mode,
    pub tickers: Vec<String>,
    pub results: Vec<BacktestResult>,
    /// Risk-free rate on each out-of-sample date.
    pub rf: Vec<f64>,
    /// Dynamic mode only: one record per refit.
    pub fits: Vec<FitRecord>,
}

impl BacktestRun {
    pub fn dates(&self) -> &[NaiveDate] {
        self.results.first().map_or(&[], |r| &r.dates)
    }

    pub fn warning_count(&self) -> usize {
        self.results.iter().map(|r| r.warnings.len()).sum()
    }

    pub fn get(&self, label: &str) -> Option<&BacktestResult> {
        self.results.iter().find(|r| r.strategy.label() == label)
    }
}

/// What the optimizers see on one day.
struct DayInputs<'a> {
    moments: Result<MomentEstimates, OptimError>,
    scenarios: &'a [Vec<f64>],
    rf: f64,
}

fn optimize(
    spec: &StrategySpec,
    day: &DayInputs<'_>,
    tickers: &[String],
    box_bound: f64,
    gross_bound: f64,
) -> Result<WeightVector, String> {
    let conf = spec.confidence();
    let cvar = |c: f64| {
        let mut p = CvarProblem::new(day.scenarios, tickers.to_vec(), c, day.rf, spec.regime);
        p.box_bound = box_bound;
        p
    };
    let out = match spec.family {
        StrategyFamily::Ewp => return equal_weights(tickers).map_err(|e| e.to_string()),
        StrategyFamily::Mvp => {
            let m = day.moments.as_ref().map_err(|e| e.to_string())?;
            min_variance_portfolio(m, spec.regime).map(|p| p.weights)
        }
        StrategyFamily::Tvp => {
            let m = day.moments.as_ref().map_err(|e| e.to_string())?;
            tangency_portfolio(m, day.rf, spec.regime).map(|p| p.weights)
        }
        StrategyFamily::CvarMin => {
            min_cvar_portfolio(&cvar(conf.unwrap_or(0.95))).map(|s| s.weights)
        }
        StrategyFamily::CvarTangent => {
            max_starr_portfolio(&cvar(conf.unwrap_or(0.95))).map(|s| s.weights)
        }
    };
    let w = out.map_err(|e| e.to_string())?;
    if w.regime == Regime::LongShort {
        w.check_bound(gross_bound).map_err(|e| e.to_string())?;
    }
    Ok(w)
}

/// Keeps `prev` (or equal weights on the first day) when `new` failed.
fn resolve(
    new: Result<WeightVector, String>,
    prev: Option<&WeightVector>,
    tickers: &[String],
    regime: Regime,
    date: NaiveDate,
    label: &str,
    warnings: &mut Vec<WarningEvent>,
) -> WeightVector {
    match new {
        Ok(w) => w,
        Err(msg) => {
            log::warn!("{label} on {date}: {msg}; carrying previous weights");
            warnings.push(WarningEvent {
                date,
                strategy: label.to_string(),
                message: msg,
            });
            match prev {
                Some(w) => w.clone(),
                None => {
                    let mut w = equal_weights(tickers).expect("non-empty tickers");
                    w.regime = regime;
                    w
                }
            }
        }
    }
}

/// Runs every strategy over the out-of-sample days `t = W .. T-1`. Weights
/// for day `t` use rows `[t - W, t - 1]` and the risk-free rate of day
/// `t - 1`, and are applied to the simple returns of day `t`.
pub fn run_backtest(
    panel: &ReturnPanel,
    rf: &RiskFreeSeries,
    config: &BacktestConfig,
) -> Result<BacktestRun, BacktestError> {
    config.validate()?;
    let w = config.window_length;
    let t_all = panel.len();
    if t_all < w + 1 {
        return Err(BacktestError::PanelTooShort {
            rows: t_all,
            window: w,
        });
    }
    let simple = panel.to_simple();
    let rows = &simple.returns;
    let tickers = &simple.tickers;
    let rf = if rf.dates == simple.dates {
        rf.clone()
    } else {
        align_riskfree(&simple, rf)?
    };
    let days: Vec<usize> = (w..t_all).collect();
    let dates: Vec<NaiveDate> = days.iter().map(|&t| simple.dates[t]).collect();
    let labels: Vec<String> = config.strategies.iter().map(|s| s.label()).collect();
    let needs_moments = config
        .strategies
        .iter()
        .any(|s| matches!(s.family, StrategyFamily::Mvp | StrategyFamily::Tvp));

    // raw[d][k]: optimizer output for day d and strategy k
    let mut fits = Vec::new();
    let raw: Vec<Vec<Result<WeightVector, String>>> = match config.mode {
        Mode::Historical => days
            .par_iter()
            .map(|&t| {
                let window = &rows[t - w..t];
                let day = DayInputs {
                    moments: if needs_moments {
                        estimate_moments(window, tickers)
                    } else {
                        Err(OptimError::Invalid("unused".into()))
                    },
                    scenarios: window,
                    rf: rf.daily_rate[t - 1],
                };
                config
                    .strategies
                    .par_iter()
                    .map(|s| optimize(s, &day, tickers, config.box_bound, config.gross_bound))
                    .collect()
            })
            .collect(),
        Mode::Dynamic => {
            let mut engine =
                DynamicEngine::new(config.scenario_count, config.refit_every, config.seed);
            let mut out = Vec::with_capacity(days.len());
            for &t in &days {
                let sims = engine.scenarios_for(rows, t, w);
                if engine.refitted() {
                    if let Some(c) = engine.copula() {
                        for (i, s) in engine.states().iter().enumerate() {
                            if s.boundary || s.nu_at_upper || !s.converged {
                                log::info!(
                                    "{} window ending {}: boundary={} nu_at_upper={} converged={}",
                                    tickers[i],
                                    simple.dates[t - 1],
                                    s.boundary,
                                    s.nu_at_upper,
                                    s.converged
                                );
                            }
                        }
                        fits.push(FitRecord {
                            date: simple.dates[t - 1],
                            params: engine.states().iter().map(|s| s.params).collect(),
                            copula_df: c.df,
                        });
                    }
                }
                let day_out: Vec<Result<WeightVector, String>> = match &sims {
                    Ok(set) => {
                        let day = DayInputs {
                            moments: if needs_moments {
                                estimate_moments(&set.draws, tickers)
                            } else {
                                Err(OptimError::Invalid("unused".into()))
                            },
                            scenarios: &set.draws,
                            rf: rf.daily_rate[t - 1],
                        };
                        config
                            .strategies
                            .par_iter()
                            .map(|s| {
                                optimize(s, &day, tickers, config.box_bound, config.gross_bound)
                            })
                            .collect()
                    }
                    Err(e) => {
                        let msg = format!("scenario generation failed: {e}");
                        config
                            .strategies
                            .iter()
                            .map(|s| {
                                if s.family == StrategyFamily::Ewp {
                                    equal_weights(tickers).map_err(|e| e.to_string())
                                } else {
                                    Err(msg.clone())
                                }
                            })
                            .collect()
                    }
                };
                out.push(day_out);
            }
            out
        }
    };

    let results = config
        .strategies
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut warnings = Vec::new();
            let mut weights: Vec<WeightVector> = Vec::with_capacity(days.len());
            for (d, day_raw) in raw.iter().enumerate() {
                let w = resolve(
                    day_raw[k].clone(),
                    weights.last(),
                    tickers,
                    spec.regime,
                    dates[d],
                    &labels[k],
                    &mut warnings,
                );
                weights.push(w);
            }
            let mut value = config.initial;
            let mut returns = Vec::with_capacity(days.len());
            let mut prices = Vec::with_capacity(days.len());
            for (d, &t) in days.iter().enumerate() {
                let r: f64 = weights[d]
                    .weights
                    .iter()
                    .zip(&rows[t])
                    .map(|(a, b)| a * b)
                    .sum();
                value *= 1.0 + r;
                returns.push(r);
                prices.push(value);
            }
            BacktestResult {
                strategy: *spec,
                dates: dates.clone(),
                weights,
                returns,
                prices,
                warnings,
            }
        })
        .collect();

    Ok(BacktestRun {
        mode: config.mode,
        tickers: tickers.clone(),
        results,
        rf: days.iter().map(|&t| rf.daily_rate[t]).collect(),
        fits,
    })
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub strategy: String,
    pub report: RatioReport,
    pub terminal_price: f64,
}

/// Ratio report and terminal value of each result, with the benchmark row
/// first. `rf` is the daily rate on each shared date.
pub fn compare_to_benchmark(
    results: &[BacktestResult],
    benchmark: &BacktestResult,
    rf: &[f64],
) -> Result<Vec<ComparisonRow>, BacktestError> {
    if rf.len() != benchmark.dates.len() || results.iter().any(|r| r.dates != benchmark.dates) {
        return Err(BacktestError::DateAxisMismatch);
    }
    let row = |r: &BacktestResult| ComparisonRow {
        strategy: r.strategy.label(),
        report: RatioReport::compute(&r.returns, &r.prices, rf, &benchmark.returns),
        terminal_price: r.prices.last().copied().unwrap_or(f64::NAN),
    };
    let mut out = vec![row(benchmark)];
    out.extend(
        results
            .iter()
            .filter(|r| r.strategy != benchmark.strategy)
            .map(row),
    );
    Ok(out)
}
