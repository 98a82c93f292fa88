//! Seeded synthetic market: one common factor, GARCH volatility with
//! Student-t shocks per asset, written in the same CSV layout as real
//! snapshots.

use std::io;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};

use crate::io::create;
use crate::market_data::{PriceSeries, RiskFreeSeries};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    /// Trading days of prices (returns are one fewer).
    pub n_days: usize,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_assets: 10,
            n_days: 3001,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2012, 1, 3).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub prices: Vec<PriceSeries>,
    /// Annual percent, one observation per trading day.
    pub riskfree_percent: Vec<(NaiveDate, f64)>,
}

impl SyntheticMarket {
    pub fn riskfree(&self) -> RiskFreeSeries {
        RiskFreeSeries {
            dates: self.riskfree_percent.iter().map(|r| r.0).collect(),
            daily_rate: self
                .riskfree_percent
                .iter()
                .map(|r| RiskFreeSeries::annual_percent_to_daily(r.1))
                .collect(),
        }
    }
}

pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn ticker(i: usize) -> String {
    format!("S{i:02}")
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_assets;
    let dates = trading_days(spec.start, spec.n_days);

    // Per-asset parameters: factor loading, drift, GARCH and tail shape.
    // The last asset barely loads on the factor.
    let params: Vec<(f64, f64, f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let load = if i + 1 == n && n > 1 {
                0.15
            } else {
                rng.random_range(0.45..0.85)
            };
            let drift = rng.random_range(-0.0001..0.0006);
            let vol = rng.random_range(0.008..0.02);
            let a1 = rng.random_range(0.04..0.12);
            let b1 = rng.random_range(0.84..0.985 - a1);
            let nu = rng.random_range(4.0..10.0);
            (load, drift, vol, a1, b1, nu)
        })
        .collect();
    let factor_t = StudentT::new(6.0).expect("df > 0");
    let unit = |nu: f64| ((nu - 2.0) / nu).sqrt();
    let dists: Vec<StudentT<f64>> = params
        .iter()
        .map(|p| StudentT::new(p.5).expect("df > 0"))
        .collect();

    let mut s2: Vec<f64> = params.iter().map(|p| p.2 * p.2).collect();
    let mut shock = vec![0.0; n];
    let mut price = vec![100.0; n];
    let mut paths: Vec<Vec<f64>> = (0..n).map(|_| vec![100.0]).collect();
    for _ in 1..spec.n_days {
        let f = factor_t.sample(&mut rng) * unit(6.0);
        for i in 0..n {
            let (load, drift, vol, a1, b1, nu) = params[i];
            let omega = vol * vol * (1.0 - a1 - b1);
            s2[i] = omega + a1 * shock[i] * shock[i] + b1 * s2[i];
            let e = load * f + (1.0 - load * load).sqrt() * dists[i].sample(&mut rng) * unit(nu);
            shock[i] = s2[i].sqrt() * e;
            let r = (drift + shock[i]).max(-0.5);
            price[i] *= 1.0 + r;
            paths[i].push(price[i]);
        }
    }

    let prices = paths
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            PriceSeries::new(ticker(i), dates.clone(), p)
                .expect("positive prices on ascending dates")
        })
        .collect();
    let mut level: f64 = 1.5;
    let riskfree_percent = dates
        .iter()
        .map(|d| {
            level = (level + rng.random_range(-0.02..0.02)).clamp(0.0, 5.0);
            (*d, (level * 100.0).round() / 100.0)
        })
        .collect();
    SyntheticMarket {
        prices,
        riskfree_percent,
    }
}

/// Writes `<dir>/prices/<ticker>.csv`, `<dir>/riskfree.csv` and
/// `<dir>/manifest.txt`.
pub fn write_market(dir: impl AsRef<Path>, market: &SyntheticMarket) -> io::Result<()> {
    use std::io::Write;
    let dir = dir.as_ref();
    let mut manifest = create(dir.join("manifest.txt"))?;
    for s in &market.prices {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(create(
                dir.join("prices").join(format!("{}.csv", s.ticker)),
            )?);
        w.write_record(["date", "close"])?;
        for (d, p) in s.dates.iter().zip(&s.prices) {
            w.write_record([d.to_string(), format!("{p}")])?;
        }
        w.flush()?;
        writeln!(manifest, "{} = prices/{}.csv", s.ticker, s.ticker)?;
    }
    manifest.flush()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(dir.join("riskfree.csv"))?);
    w.write_record(["date", "annual_rate_percent"])?;
    for (d, r) in &market.riskfree_percent {
        w.write_record([d.to_string(), format!("{r}")])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{
        compute_returns, load_manifest, load_price_csv_as, load_riskfree_csv, ReturnKind,
    };

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec {
            n_days: 400,
            ..Default::default()
        };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.prices.len(), 10);
        assert!(a.prices.iter().all(|p| p.len() == 400));
        assert!(a.prices[0]
            .dates
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn files_load_back() {
        let spec = SyntheticSpec {
            n_assets: 3,
            n_days: 200,
            ..Default::default()
        };
        let m = generate(&spec);
        let dir = tempfile::tempdir().unwrap();
        write_market(dir.path(), &m).unwrap();
        let entries = load_manifest(dir.path().join("manifest.txt")).unwrap();
        let series: Vec<_> = entries
            .iter()
            .map(|(t, p)| load_price_csv_as(p, t.clone()).unwrap())
            .collect();
        assert_eq!(series, m.prices);
        let panel = compute_returns(&series, ReturnKind::Simple).unwrap();
        assert_eq!(panel.len(), 199);
        let rf = load_riskfree_csv(dir.path().join("riskfree.csv")).unwrap();
        assert_eq!(rf.dates.len(), 200);
    }
}
