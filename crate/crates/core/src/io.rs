//! CSV writers for every artifact, plus the panel reader used between
//! commands. Numbers use the shortest round-trip representation so reruns
//! are byte-identical.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::backtest::{BacktestResult, ComparisonRow, FitRecord};
use crate::market_data::{DataError, ReturnKind, ReturnPanel};
use crate::mean_variance::{CapitalMarketLine, FrontierPoint};
use crate::robust::RobustFit;
use crate::tail::HillCurve;

pub fn create(path: impl AsRef<Path>) -> io::Result<BufWriter<File>> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `date,<ticker>...`, one row per panel date.
pub fn write_panel<W: Write>(w: W, panel: &ReturnPanel) -> io::Result<()> {
    let mut out = writer(w);
    let mut header = vec!["date".to_string()];
    header.extend(panel.tickers.iter().cloned());
    out.write_record(&header)?;
    for (d, row) in panel.dates.iter().zip(&panel.returns) {
        let mut rec = vec![d.to_string()];
        rec.extend(row.iter().map(|v| num(*v)));
        out.write_record(&rec)?;
    }
    out.flush()
}

/// Reads a file written by [`write_panel`].
pub fn read_panel(path: impl AsRef<Path>, kind: ReturnKind) -> Result<ReturnPanel, DataError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|source| DataError::Csv {
        path: label.clone(),
        source,
    })?;
    let header = rdr
        .headers()
        .map_err(|source| DataError::Csv {
            path: label.clone(),
            source,
        })?
        .clone();
    if header.get(0) != Some("date") || header.len() < 2 {
        return Err(DataError::BadHeader {
            file: label,
            expected: "date,<ticker>...".into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|source| DataError::Csv {
            path: label.clone(),
            source,
        })?;
        let malformed = |reason: String| DataError::MalformedRow {
            file: label.clone(),
            line,
            reason,
        };
        let date =
            NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| malformed(e.to_string()))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("{s}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        dates.push(date);
        rows.push(row);
    }
    ReturnPanel::new(dates, tickers, rows, kind)
}

/// `strategy,date,return,price`.
pub fn write_results<W: Write>(w: W, results: &[BacktestResult]) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["strategy", "date", "return", "price"])?;
    for r in results {
        let label = r.strategy.label();
        for ((d, ret), p) in r.dates.iter().zip(&r.returns).zip(&r.prices) {
            out.write_record([label.clone(), d.to_string(), num(*ret), num(*p)])?;
        }
    }
    out.flush()
}

/// `date,ticker,weight`.
pub fn write_weights<W: Write>(w: W, result: &BacktestResult) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "ticker", "weight"])?;
    for (d, wv) in result.dates.iter().zip(&result.weights) {
        for (t, v) in wv.tickers.iter().zip(&wv.weights) {
            out.write_record([d.to_string(), t.clone(), num(*v)])?;
        }
    }
    out.flush()
}

/// `portfolio,metric,value`.
pub fn write_ratio_table<W: Write>(w: W, rows: &[ComparisonRow]) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["portfolio", "metric", "value"])?;
    for row in rows {
        for (m, v) in row.report.values() {
            out.write_record([row.strategy.as_str(), m, &num(v)])?;
        }
        out.write_record([
            row.strategy.as_str(),
            "terminal_price",
            &num(row.terminal_price),
        ])?;
    }
    out.flush()
}

/// `metric,strategy,historical,dynamic` for the strategies present in both.
pub fn write_mode_comparison<W: Write>(
    w: W,
    metrics: &[&str],
    historical: &[ComparisonRow],
    dynamic: &[ComparisonRow],
) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["metric", "strategy", "historical", "dynamic"])?;
    for m in metrics {
        for h in historical {
            let Some(d) = dynamic.iter().find(|d| d.strategy == h.strategy) else {
                continue;
            };
            let get = |r: &ComparisonRow| r.report.get(m).unwrap_or(f64::NAN);
            out.write_record([m.to_string(), h.strategy.clone(), num(get(h)), num(get(d))])?;
        }
    }
    out.flush()
}

/// `target_return,stdev,<ticker>...` with one weight column per ticker.
pub fn write_frontier<W: Write>(w: W, points: &[FrontierPoint]) -> io::Result<()> {
    let mut out = writer(w);
    let Some(first) = points.first() else {
        out.write_record(["target_return", "stdev"])?;
        return out.flush();
    };
    let mut header = vec!["target_return".to_string(), "stdev".to_string()];
    header.extend(first.weights.tickers.iter().cloned());
    out.write_record(&header)?;
    for p in points {
        let mut rec = vec![num(p.target_return), num(p.stdev)];
        rec.extend(p.weights.weights.iter().map(|v| num(*v)));
        out.write_record(&rec)?;
    }
    out.flush()
}

/// `stdev,return` sampled at `n` points up to `max_stdev`.
pub fn write_cml<W: Write>(
    w: W,
    cml: &CapitalMarketLine,
    n: usize,
    max_stdev: f64,
) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["stdev", "return"])?;
    for (s, r) in cml.sample(n, max_stdev) {
        out.write_record([num(s), num(r)])?;
    }
    out.flush()
}

/// `k,alpha,ci_low,ci_high`.
pub fn write_hill<W: Write>(w: W, curve: &HillCurve) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record(["k", "alpha", "ci_low", "ci_high"])?;
    for i in 0..curve.len() {
        out.write_record([
            curve.k_values[i].to_string(),
            num(curve.hill[i]),
            num(curve.ci_low[i]),
            num(curve.ci_high[i]),
        ])?;
    }
    out.flush()
}

/// `ticker,benchmark,alpha,beta,alpha_lo,alpha_hi,beta_lo,beta_hi`.
pub fn write_regressions<W: Write>(w: W, rows: &[(String, String, RobustFit)]) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "ticker",
        "benchmark",
        "alpha",
        "beta",
        "alpha_lo",
        "alpha_hi",
        "beta_lo",
        "beta_hi",
    ])?;
    for (t, b, f) in rows {
        out.write_record([
            t.clone(),
            b.clone(),
            num(f.alpha),
            num(f.beta),
            num(f.ci95_alpha.0),
            num(f.ci95_alpha.1),
            num(f.ci95_beta.0),
            num(f.ci95_beta.1),
        ])?;
    }
    out.flush()
}

/// `window_end,ticker,delta0,ar1,ma1,alpha0,alpha1,beta1,nu,loglik`, plus the
/// copula df of each refit under the ticker `copula`.
pub fn write_fits<W: Write>(w: W, tickers: &[String], fits: &[FitRecord]) -> io::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "window_end",
        "ticker",
        "delta0",
        "ar1",
        "ma1",
        "alpha0",
        "alpha1",
        "beta1",
        "nu",
        "loglik",
    ])?;
    for f in fits {
        for (t, p) in tickers.iter().zip(&f.params) {
            out.write_record([
                f.date.to_string(),
                t.clone(),
                num(p.delta0),
                num(p.ar1),
                num(p.ma1),
                num(p.alpha0),
                num(p.alpha1),
                num(p.beta1),
                num(p.nu),
                num(p.loglik),
            ])?;
        }
        let blank = String::new();
        out.write_record([
            f.date.to_string(),
            "copula".into(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            num(f.copula_df),
            blank,
        ])?;
    }
    out.flush()
}
