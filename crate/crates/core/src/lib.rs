//! Rolling-window portfolio construction and evaluation.
//!
//! The crate covers the full pipeline from price snapshots to performance
//! tables:
//!
//! * [`market_data`] loads `date,close` snapshots, aligns calendars and builds
//!   return panels.
//! * [`portfolio`] holds weight vectors, strategy labels and the equally
//!   weighted benchmark.
//! * [`mean_variance`] and [`cvar`] produce minimum-risk and tangency
//!   portfolios, backed by the dense solvers in [`qp`] and [`lp`].
//! * [`dynamic`] fits ARMA(1,1)-GARCH(1,1) marginals with Student-t
//!   innovations, a t-copula across assets, and simulates next-day scenarios.
//! * [`backtest`] runs the daily rolling-window loop for every strategy.
//! * [`risk_metrics`], [`tail`] and [`robust`] evaluate the resulting series.

pub mod backtest;
pub mod cvar;
pub mod dynamic;
pub mod io;
pub mod lp;
pub mod market_data;
pub mod mean_variance;
pub mod portfolio;
pub mod qp;
pub mod risk_metrics;
pub mod robust;
pub mod stats;
pub mod synthetic;
pub mod tail;

pub use backtest::{BacktestConfig, BacktestError, BacktestResult, Mode, WarningEvent};
pub use cvar::CvarProblem;
pub use dynamic::{AgFitState, AgParams, CopulaParams, ScenarioSet};
pub use market_data::{PriceSeries, ReturnKind, ReturnPanel, RiskFreeSeries};
pub use mean_variance::{FrontierCoefficients, FrontierPoint, MomentEstimates};
pub use portfolio::{Regime, StrategyFamily, StrategySpec, WeightVector};
pub use risk_metrics::RatioReport;
pub use robust::RobustFit;
pub use tail::HillCurve;

/// Errors from every module, for callers that drive the whole pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] market_data::DataError),
    #[error(transparent)]
    Portfolio(#[from] portfolio::PortfolioError),
    #[error(transparent)]
    Optim(#[from] mean_variance::OptimError),
    #[error(transparent)]
    Metric(#[from] risk_metrics::MetricError),
    #[error(transparent)]
    Tail(#[from] tail::TailError),
    #[error(transparent)]
    Regression(#[from] robust::RegressionError),
    #[error(transparent)]
    Dynamic(#[from] dynamic::DynamicError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Trading days per year, used for rate conversion and annualized growth.
pub const TRADING_DAYS: f64 = 252.0;
