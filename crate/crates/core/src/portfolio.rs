//! Weight vectors, strategy labels and the equally weighted benchmark.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PortfolioError {
    #[error("portfolio needs at least one asset")]
    ZeroAssets,
    #[error("dimension mismatch: {expected} weights vs {got} returns")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights sum to {0}, expected 1")]
    BadSum(f64),
    #[error("long-only weight {weight} for {ticker} is negative")]
    NegativeLongOnly { ticker: String, weight: f64 },
    #[error("weight {weight} for {ticker} exceeds the bound {bound}")]
    BoundExceeded {
        ticker: String,
        weight: f64,
        bound: f64,
    },
    #[error("non-finite weight for {0}")]
    NonFinite(String),
    #[error("unknown strategy label `{0}`")]
    UnknownStrategy(String),
    #[error("confidence must accompany CVaR strategies only")]
    ConfidenceMismatch,
}

/// Tolerance on `sum(w) = 1`.
pub const SUM_TOLERANCE: f64 = 1e-8;
/// Largest negative value tolerated in a long-only vector.
pub const LONG_ONLY_TOLERANCE: f64 = 1e-10;
/// Default per-asset box used by the long-short LP/QP paths.
pub const DEFAULT_BOX_BOUND: f64 = 1.0;
/// Default cap on `|w_i|` for any long-short weight vector.
pub const DEFAULT_GROSS_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    LongOnly,
    LongShort,
}

impl Regime {
    pub fn prefix(self) -> &'static str {
        match self {
            Regime::LongOnly => "LO",
            Regime::LongShort => "LS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
    pub regime: Regime,
}

impl WeightVector {
    /// Checks the budget constraint and, for long-only vectors, the sign
    /// constraint. Tiny negative long-only weights within tolerance are
    /// clipped to zero.
    pub fn new(
        tickers: Vec<String>,
        mut weights: Vec<f64>,
        regime: Regime,
    ) -> Result<Self, PortfolioError> {
        if tickers.is_empty() {
            return Err(PortfolioError::ZeroAssets);
        }
        if tickers.len() != weights.len() {
            return Err(PortfolioError::DimensionMismatch {
                expected: tickers.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(PortfolioError::NonFinite(tickers[i].clone()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(PortfolioError::BadSum(sum));
        }
        if regime == Regime::LongOnly {
            for (t, w) in tickers.iter().zip(weights.iter_mut()) {
                if *w < -LONG_ONLY_TOLERANCE {
                    return Err(PortfolioError::NegativeLongOnly {
                        ticker: t.clone(),
                        weight: *w,
                    });
                }
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        }
        Ok(Self {
            tickers,
            weights,
            regime,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Checks `|w_i| <= bound` for every asset.
    pub fn check_bound(&self, bound: f64) -> Result<(), PortfolioError> {
        for (t, w) in self.tickers.iter().zip(&self.weights) {
            if w.abs() > bound + 1e-9 {
                return Err(PortfolioError::BoundExceeded {
                    ticker: t.clone(),
                    weight: *w,
                    bound,
                });
            }
        }
        Ok(())
    }

    pub fn gross_exposure(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// `w_i = 1/N` for every asset, long-only.
pub fn equal_weights(tickers: &[String]) -> Result<WeightVector, PortfolioError> {
    if tickers.is_empty() {
        return Err(PortfolioError::ZeroAssets);
    }
    let w = 1.0 / tickers.len() as f64;
    Ok(WeightVector {
        tickers: tickers.to_vec(),
        weights: vec![w; tickers.len()],
        regime: Regime::LongOnly,
    })
}

/// Equal weights over `n` anonymous assets named `A1..An`.
pub fn equal_weights_n(n: usize) -> Result<WeightVector, PortfolioError> {
    let tickers: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    equal_weights(&tickers)
}

/// `R_p = sum_i w_i R_i`.
pub fn portfolio_return(
    weights: &WeightVector,
    asset_returns: &[f64],
) -> Result<f64, PortfolioError> {
    if weights.len() != asset_returns.len() {
        return Err(PortfolioError::DimensionMismatch {
            expected: weights.len(),
            got: asset_returns.len(),
        });
    }
    Ok(dot(&weights.weights, asset_returns))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyFamily {
    /// Equally weighted benchmark.
    Ewp,
    /// Global minimum variance.
    Mvp,
    /// Tangency (maximum Sharpe).
    Tvp,
    /// Minimum CVaR.
    CvarMin,
    /// Maximum STARR (CVaR tangency).
    CvarTangent,
}

/// One backtested strategy, e.g. `LS_TVP` or `LO_C99`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategySpec {
    pub family: StrategyFamily,
    /// Confidence in basis points (9500 or 9900) for the CVaR families.
    confidence_bp: Option<u32>,
    pub regime: Regime,
}

impl StrategySpec {
    pub fn new(
        family: StrategyFamily,
        confidence: Option<f64>,
        regime: Regime,
    ) -> Result<Self, PortfolioError> {
        let needs = matches!(
            family,
            StrategyFamily::CvarMin | StrategyFamily::CvarTangent
        );
        if needs != confidence.is_some() {
            return Err(PortfolioError::ConfidenceMismatch);
        }
        let confidence_bp = match confidence {
            Some(c) if c > 0.0 && c < 1.0 => Some((c * 10_000.0).round() as u32),
            Some(_) => return Err(PortfolioError::ConfidenceMismatch),
            None => None,
        };
        let regime = if family == StrategyFamily::Ewp {
            Regime::LongOnly
        } else {
            regime
        };
        Ok(Self {
            family,
            confidence_bp,
            regime,
        })
    }

    pub fn ewp() -> Self {
        Self {
            family: StrategyFamily::Ewp,
            confidence_bp: None,
            regime: Regime::LongOnly,
        }
    }

    pub fn confidence(&self) -> Option<f64> {
        self.confidence_bp.map(|bp| bp as f64 / 10_000.0)
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// The thirteen strategies of the standard report, benchmark first.
    pub fn standard_set() -> Vec<StrategySpec> {
        let mut out = vec![StrategySpec::ewp()];
        for regime in [Regime::LongShort, Regime::LongOnly] {
            for label in ["MVP", "TVP", "C95", "C99", "TC95", "TC99"] {
                out.push(
                    format!("{}_{label}", regime.prefix())
                        .parse()
                        .expect("static label"),
                );
            }
        }
        out
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = self.confidence_bp.map(|bp| bp / 100).unwrap_or(0);
        let body = match self.family {
            StrategyFamily::Ewp => return f.write_str("EWP"),
            StrategyFamily::Mvp => "MVP".to_string(),
            StrategyFamily::Tvp => "TVP".to_string(),
            StrategyFamily::CvarMin => format!("C{pct}"),
            StrategyFamily::CvarTangent => format!("TC{pct}"),
        };
        write!(f, "{}_{}", self.regime.prefix(), body)
    }
}

impl FromStr for StrategySpec {
    type Err = PortfolioError;

    /// Accepts `EWP`/`EQW`, or `LO_`/`LS_` followed by `MVP`, `TVP`, `C<pct>`
    /// or `TC<pct>`. A space may replace the underscore.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(' ', "_");
        if norm == "EWP" || norm == "EQW" {
            return Ok(StrategySpec::ewp());
        }
        let unknown = || PortfolioError::UnknownStrategy(s.to_string());
        let (prefix, body) = norm.split_once('_').ok_or_else(unknown)?;
        let regime = match prefix {
            "LO" => Regime::LongOnly,
            "LS" => Regime::LongShort,
            _ => return Err(unknown()),
        };
        let pct = |digits: &str| -> Result<f64, PortfolioError> {
            let v: u32 = digits.parse().map_err(|_| unknown())?;
            if v == 0 || v >= 100 {
                return Err(unknown());
            }
            Ok(v as f64 / 100.0)
        };
        let (family, conf) = match body {
            "MVP" => (StrategyFamily::Mvp, None),
            "TVP" => (StrategyFamily::Tvp, None),
            b if b.starts_with("TC") => (StrategyFamily::CvarTangent, Some(pct(&b[2..])?)),
            b if b.starts_with('C') => (StrategyFamily::CvarMin, Some(pct(&b[1..])?)),
            _ => return Err(unknown()),
        };
        StrategySpec::new(family, conf, regime)
    }
}
