//! TOML run configuration. Relative paths resolve against the directory that
//! holds the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use portopt::backtest::Mode;
use portopt::portfolio::{StrategySpec, DEFAULT_BOX_BOUND, DEFAULT_GROSS_BOUND};
use portopt::tail::TailSide;
use portopt::ReturnKind;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub frontier: FrontierSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Lines of `TICKER = path/to/prices.csv`.
    pub manifest: PathBuf,
    /// `date,annual_rate_percent`; a zero rate is used when absent.
    pub riskfree: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    #[serde(default = "simple")]
    pub return_kind: ReturnKind,
}

fn simple() -> ReturnKind {
    ReturnKind::Simple
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub window_length: usize,
    /// Labels such as `LS_TVP`; empty means the standard thirteen.
    pub strategies: Vec<String>,
    pub mode: Mode,
    pub scenario_count: usize,
    pub refit_every: usize,
    pub initial: f64,
    pub box_bound: f64,
    pub gross_bound: f64,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            window_length: 1008,
            strategies: Vec::new(),
            mode: Mode::Historical,
            scenario_count: 10_000,
            refit_every: 1,
            initial: 100.0,
            box_bound: DEFAULT_BOX_BOUND,
            gross_bound: DEFAULT_GROSS_BOUND,
        }
    }
}

impl BacktestSection {
    pub fn strategy_specs(&self) -> Result<Vec<StrategySpec>, String> {
        if self.strategies.is_empty() {
            return Ok(StrategySpec::standard_set());
        }
        self.strategies
            .iter()
            .map(|s| s.parse::<StrategySpec>().map_err(|e| format!("{s}: {e}")))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontierSection {
    pub points: usize,
    /// Tickers highlighted on the chart besides EWP.
    pub markers: Vec<String>,
}

impl Default for FrontierSection {
    fn default() -> Self {
        Self {
            points: 60,
            markers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    /// Series for Hill curves: `EWP`, a panel ticker, or a key of `extra`.
    pub hill: Vec<String>,
    pub tail: TailSide,
    /// Defaults to `min(n / 10, 1000)` per series.
    pub k_max: Option<usize>,
    pub huber_tuning: f64,
    /// Regression benchmarks: `EWP`, a panel ticker, or a key of `extra`.
    pub benchmarks: Vec<String>,
    /// Outside price files, e.g. an index, keyed by display name.
    pub extra: BTreeMap<String, PathBuf>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            hill: vec!["EWP".into()],
            tail: TailSide::Loss,
            k_max: None,
            huber_tuning: portopt::robust::DEFAULT_TUNING,
            benchmarks: vec!["EWP".into()],
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// `portfolio,metric,value` table to check against.
    pub reference: Option<PathBuf>,
    pub tolerance: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            reference: None,
            tolerance: 0.10,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Config = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.backtest.strategy_specs()?;
        if !(cfg.report.tolerance > 0.0) {
            return Err(format!(
                "report.tolerance {} must be positive",
                cfg.report.tolerance
            ));
        }
        if !(cfg.diagnose.huber_tuning > 0.0) {
            return Err(format!(
                "diagnose.huber_tuning {} must be positive",
                cfg.diagnose.huber_tuning
            ));
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = Config::parse("[data]\nmanifest = \"m.txt\"\n").unwrap();
        assert_eq!(cfg.backtest.window_length, 1008);
        assert_eq!(cfg.backtest.scenario_count, 10_000);
        assert_eq!(cfg.backtest.strategy_specs().unwrap().len(), 13);
        assert_eq!(cfg.diagnose.huber_tuning, 1.345);
        assert_eq!(cfg.diagnose.tail, TailSide::Loss);
        assert_eq!(cfg.report.tolerance, 0.10);
        assert_eq!(cfg.data.return_kind, ReturnKind::Simple);
    }

    #[test]
    fn full_file() {
        let cfg = Config::parse(
            r#"
seed = 3
[data]
manifest = "m.txt"
riskfree = "rf.csv"
start = "2016-01-01"
return_kind = "log"
[backtest]
mode = "dynamic"
strategies = ["EWP", "LO_TC99"]
refit_every = 5
[diagnose]
hill = ["EWP", "DJIA"]
tail = "gain"
extra = { DJIA = "prices/DJI.csv" }
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.backtest.mode, Mode::Dynamic);
        assert_eq!(cfg.backtest.strategy_specs().unwrap()[1].label(), "LO_TC99");
        assert_eq!(cfg.diagnose.extra["DJIA"], PathBuf::from("prices/DJI.csv"));
        assert_eq!(cfg.data.return_kind, ReturnKind::Log);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("[data]\nmanifest = \"m\"\nbogus = 1\n").is_err());
        assert!(
            Config::parse("[data]\nmanifest = \"m\"\n[backtest]\nstrategies = [\"XX\"]\n").is_err()
        );
        assert!(Config::parse("seed = 1\n").is_err());
    }
}
