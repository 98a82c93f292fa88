//! Price snapshots, calendar alignment and return panels.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::portfolio::WeightVector;
use crate::TRADING_DAYS;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{file}: line {line}: malformed row: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("{file}: line {line}: non-positive price {price}")]
    NonPositivePrice { file: String, line: u64, price: f64 },
    #[error("{file}: line {line}: duplicate date {date}")]
    DuplicateDate {
        file: String,
        line: u64,
        date: NaiveDate,
    },
    #[error("{file}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("no common dates across the supplied series")]
    EmptyIntersection,
    #[error("need at least one series")]
    NoSeries,
    #[error("ticker {0} appears twice")]
    DuplicateTicker(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weight tickers do not match panel tickers")]
    TickerMismatch,
    #[error("risk-free series starts on {rf_start}, after the panel start {panel_start}")]
    NoCoverage {
        rf_start: NaiveDate,
        panel_start: NaiveDate,
    },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

type Result<T> = std::result::Result<T, DataError>;

/// Adjusted-close history of one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        let ticker = ticker.into();
        if dates.len() != prices.len() {
            return Err(DataError::LengthMismatch {
                expected: dates.len(),
                got: prices.len(),
            });
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DataError::Invalid {
                what: "dates",
                reason: format!("{ticker}: {} is not after {}", w[1], w[0]),
            });
        }
        if let Some(&p) = prices.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(DataError::Invalid {
                what: "price",
                reason: format!("{ticker}: {p}"),
            });
        }
        Ok(Self {
            ticker,
            dates,
            prices,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Keeps observations within `[start, end]` (either side optional).
    pub fn restrict(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Self {
        let keep = |d: &NaiveDate| start.is_none_or(|s| *d >= s) && end.is_none_or(|e| *d <= e);
        let (dates, prices) = self
            .dates
            .iter()
            .zip(&self.prices)
            .filter(|(d, _)| keep(d))
            .map(|(d, p)| (*d, *p))
            .unzip();
        Self {
            ticker: self.ticker.clone(),
            dates,
            prices,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    Simple,
    Log,
}

/// Aligned `T x N` matrix of daily returns, stored row per date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub returns: Vec<Vec<f64>>,
    pub kind: ReturnKind,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        returns: Vec<Vec<f64>>,
        kind: ReturnKind,
    ) -> Result<Self> {
        if returns.len() != dates.len() {
            return Err(DataError::LengthMismatch {
                expected: dates.len(),
                got: returns.len(),
            });
        }
        for row in &returns {
            if row.len() != tickers.len() {
                return Err(DataError::LengthMismatch {
                    expected: tickers.len(),
                    got: row.len(),
                });
            }
            if row
                .iter()
                .any(|r| !r.is_finite() || (kind == ReturnKind::Simple && *r <= -1.0))
            {
                return Err(DataError::Invalid {
                    what: "return",
                    reason: format!("{row:?}"),
                });
            }
        }
        let mut seen = HashSet::new();
        for t in &tickers {
            if !seen.insert(t) {
                return Err(DataError::DuplicateTicker(t.clone()));
            }
        }
        Ok(Self {
            dates,
            tickers,
            returns,
            kind,
        })
    }

    /// Number of dates.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.returns.iter().map(|r| r[i]).collect()
    }

    pub fn column_by_ticker(&self, ticker: &str) -> Option<Vec<f64>> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.column(i))
    }

    /// Returns of row `t` as simple returns regardless of the panel kind.
    pub fn simple_row(&self, t: usize) -> Vec<f64> {
        match self.kind {
            ReturnKind::Simple => self.returns[t].clone(),
            ReturnKind::Log => self.returns[t].iter().map(|r| r.exp_m1()).collect(),
        }
    }

    pub fn to_simple(&self) -> ReturnPanel {
        match self.kind {
            ReturnKind::Simple => self.clone(),
            ReturnKind::Log => ReturnPanel {
                dates: self.dates.clone(),
                tickers: self.tickers.clone(),
                returns: (0..self.len()).map(|t| self.simple_row(t)).collect(),
                kind: ReturnKind::Simple,
            },
        }
    }
}

/// Daily decimal risk-free rate by date.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeSeries {
    pub dates: Vec<NaiveDate>,
    pub daily_rate: Vec<f64>,
}

impl RiskFreeSeries {
    pub fn new(dates: Vec<NaiveDate>, daily_rate: Vec<f64>) -> Result<Self> {
        if dates.len() != daily_rate.len() {
            return Err(DataError::LengthMismatch {
                expected: dates.len(),
                got: daily_rate.len(),
            });
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::Invalid {
                what: "risk-free dates",
                reason: "not strictly increasing".into(),
            });
        }
        if daily_rate.iter().any(|r| !r.is_finite()) {
            return Err(DataError::Invalid {
                what: "risk-free rate",
                reason: "non-finite".into(),
            });
        }
        Ok(Self { dates, daily_rate })
    }

    /// Converts an annualized percent quote (e.g. 5.04) to a daily decimal.
    pub fn annual_percent_to_daily(pct: f64) -> f64 {
        pct / 100.0 / TRADING_DAYS
    }

    /// Flat rate over the given calendar.
    pub fn constant(dates: &[NaiveDate], daily_rate: f64) -> Self {
        Self {
            dates: dates.to_vec(),
            daily_rate: vec![daily_rate; dates.len()],
        }
    }
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: file_label(path),
            source,
        })
}

fn check_header(
    rdr: &mut csv::Reader<std::fs::File>,
    path: &Path,
    expected: &[&str],
) -> Result<()> {
    let headers = rdr.headers().map_err(|source| DataError::Csv {
        path: file_label(path),
        source,
    })?;
    let found: Vec<String> = headers
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if found.len() < expected.len() || found.iter().zip(expected).any(|(f, e)| f != e) {
        return Err(DataError::BadHeader {
            file: file_label(path),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

/// Reads a `date,close` file. The ticker is the file stem. Rows may appear
/// in any order; the result is sorted by date.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let ticker = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_price_csv_as(path, ticker)
}

pub fn load_price_csv_as(path: impl AsRef<Path>, ticker: impl Into<String>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = file_label(path);
    let mut rdr = open_csv(path)?;
    check_header(&mut rdr, path, &["date", "close"])?;

    let mut rows: Vec<(NaiveDate, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| DataError::Csv {
            path: file.clone(),
            source,
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| DataError::MalformedRow {
            file: file.clone(),
            line,
            reason,
        };
        if rec.len() < 2 {
            return Err(malformed(format!("expected 2 fields, found {}", rec.len())));
        }
        let date = parse_date(&rec[0]).map_err(&malformed)?;
        let price: f64 = rec[1]
            .parse()
            .map_err(|_| malformed(format!("bad number `{}`", &rec[1])))?;
        if !price.is_finite() {
            return Err(malformed(format!("non-finite price `{}`", &rec[1])));
        }
        if price <= 0.0 {
            return Err(DataError::NonPositivePrice { file, line, price });
        }
        rows.push((date, price, line));
    }
    if rows.is_empty() {
        return Err(DataError::Empty(file));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        let line = w[0].2.max(w[1].2);
        return Err(DataError::DuplicateDate {
            file,
            line,
            date: w[1].0,
        });
    }
    let (dates, prices) = rows.into_iter().map(|(d, p, _)| (d, p)).unzip();
    Ok(PriceSeries {
        ticker: ticker.into(),
        dates,
        prices,
    })
}

/// Reads a `date,annual_rate_percent` file. Blank or `.` cells (the usual
/// marker for holidays in published yield series) are skipped and later
/// forward-filled by [`align_riskfree`].
pub fn load_riskfree_csv(path: impl AsRef<Path>) -> Result<RiskFreeSeries> {
    let path = path.as_ref();
    let file = file_label(path);
    let mut rdr = open_csv(path)?;
    check_header(&mut rdr, path, &["date", "annual_rate_percent"])?;

    let mut rows: Vec<(NaiveDate, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| DataError::Csv {
            path: file.clone(),
            source,
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| DataError::MalformedRow {
            file: file.clone(),
            line,
            reason,
        };
        if rec.len() < 2 {
            return Err(malformed(format!("expected 2 fields, found {}", rec.len())));
        }
        let date = parse_date(&rec[0]).map_err(&malformed)?;
        let cell = rec[1].trim();
        if cell.is_empty() || cell == "." {
            continue;
        }
        let pct: f64 = cell
            .parse()
            .map_err(|_| malformed(format!("bad number `{cell}`")))?;
        if !pct.is_finite() {
            return Err(malformed(format!("non-finite rate `{cell}`")));
        }
        rows.push((date, RiskFreeSeries::annual_percent_to_daily(pct), line));
    }
    if rows.is_empty() {
        return Err(DataError::Empty(file));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(DataError::DuplicateDate {
            file,
            line: w[0].2.max(w[1].2),
            date: w[1].0,
        });
    }
    let (dates, daily_rate) = rows.into_iter().map(|(d, r, _)| (d, r)).unzip();
    Ok(RiskFreeSeries { dates, daily_rate })
}

/// Parses a universe manifest: one `TICKER = path` (or `TICKER path`) per
/// line, `#` starts a comment. Relative paths resolve against the manifest's
/// directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<(String, PathBuf)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: file_label(path),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base, &file_label(path))
}

pub fn parse_manifest(text: &str, base: &Path, label: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (ticker, file) = match line.split_once('=') {
            Some((t, f)) => (t.trim(), f.trim()),
            None => match line.split_once(char::is_whitespace) {
                Some((t, f)) => (t.trim(), f.trim()),
                None => ("", ""),
            },
        };
        if ticker.is_empty() || file.is_empty() {
            return Err(DataError::MalformedRow {
                file: label.to_string(),
                line: i as u64 + 1,
                reason: "expected `TICKER = path`".into(),
            });
        }
        if !seen.insert(ticker.to_string()) {
            return Err(DataError::DuplicateTicker(ticker.to_string()));
        }
        let p = Path::new(file);
        out.push((
            ticker.to_string(),
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            },
        ));
    }
    Ok(out)
}

/// Intersection of all calendars, ascending.
pub fn common_dates(series: &[PriceSeries]) -> Vec<NaiveDate> {
    let mut iter = series.iter();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let mut set: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for s in iter {
        let other: HashSet<&NaiveDate> = s.dates.iter().collect();
        set.retain(|d| other.contains(d));
    }
    set.into_iter().collect()
}

/// Builds the return panel on the inner-join calendar. Row `t` holds the
/// return from shared date `t` to shared date `t + 1`, dated at the latter.
pub fn compute_returns(series: &[PriceSeries], kind: ReturnKind) -> Result<ReturnPanel> {
    if series.is_empty() {
        return Err(DataError::NoSeries);
    }
    let mut seen = HashSet::new();
    for s in series {
        if !seen.insert(s.ticker.as_str()) {
            return Err(DataError::DuplicateTicker(s.ticker.clone()));
        }
    }
    let dates = common_dates(series);
    if dates.len() < 2 {
        return Err(DataError::EmptyIntersection);
    }
    let aligned: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mut j = 0;
            dates
                .iter()
                .map(|d| {
                    while s.dates[j] < *d {
                        j += 1;
                    }
                    s.prices[j]
                })
                .collect()
        })
        .collect();
    let returns = (1..dates.len())
        .map(|t| {
            aligned
                .iter()
                .map(|p| match kind {
                    ReturnKind::Simple => p[t] / p[t - 1] - 1.0,
                    ReturnKind::Log => (p[t] / p[t - 1]).ln(),
                })
                .collect()
        })
        .collect();
    Ok(ReturnPanel {
        dates: dates[1..].to_vec(),
        tickers: series.iter().map(|s| s.ticker.clone()).collect(),
        returns,
        kind,
    })
}

/// Value path of a daily-rebalanced portfolio. Element `t` is the value after
/// applying row `t`; the starting value itself is not included.
pub fn cumulative_price(
    panel: &ReturnPanel,
    weights_by_day: &[WeightVector],
    initial: f64,
) -> Result<Vec<f64>> {
    if weights_by_day.len() != panel.len() {
        return Err(DataError::LengthMismatch {
            expected: panel.len(),
            got: weights_by_day.len(),
        });
    }
    if !(initial > 0.0) {
        return Err(DataError::Invalid {
            what: "initial value",
            reason: initial.to_string(),
        });
    }
    let mut value = initial;
    let mut out = Vec::with_capacity(panel.len());
    for (t, w) in weights_by_day.iter().enumerate() {
        if w.tickers != panel.tickers {
            return Err(DataError::TickerMismatch);
        }
        let r = panel.simple_row(t);
        value *= 1.0 + w.weights.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        out.push(value);
    }
    Ok(out)
}

/// One rate per panel date, forward-filling gaps from the last observation
/// on or before that date.
pub fn align_riskfree(panel: &ReturnPanel, rf: &RiskFreeSeries) -> Result<RiskFreeSeries> {
    align_riskfree_dates(&panel.dates, rf)
}

pub fn align_riskfree_dates(dates: &[NaiveDate], rf: &RiskFreeSeries) -> Result<RiskFreeSeries> {
    let (Some(&first), Some(&rf_start)) = (dates.first(), rf.dates.first()) else {
        return Ok(RiskFreeSeries {
            dates: dates.to_vec(),
            daily_rate: Vec::new(),
        });
    };
    if rf_start > first {
        return Err(DataError::NoCoverage {
            rf_start,
            panel_start: first,
        });
    }
    let mut j = 0;
    let daily_rate = dates
        .iter()
        .map(|d| {
            while j + 1 < rf.dates.len() && rf.dates[j + 1] <= *d {
                j += 1;
            }
            rf.daily_rate[j]
        })
        .collect();
    Ok(RiskFreeSeries {
        dates: dates.to_vec(),
        daily_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{equal_weights, Regime};
    use std::io::Write;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    fn series(ticker: &str, days: std::ops::RangeInclusive<u32>, prices: &[f64]) -> PriceSeries {
        let dates = days.map(|k| d(&format!("2020-01-{k:02}"))).collect();
        PriceSeries::new(ticker, dates, prices.to_vec()).unwrap()
    }

    #[test]
    fn reads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "AAA.csv",
            "date,close\n2020-01-01,100\n2020-01-02,101\n2020-01-03,102\n",
        );
        let s = load_price_csv(&p).unwrap();
        assert_eq!(s.ticker, "AAA");
        assert_eq!(s.prices, vec![100.0, 101.0, 102.0]);
    }

    #[test]
    fn zero_price_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "B.csv",
            "date,close\n2020-01-01,100\n2020-01-02,101\n2020-01-03,0\n",
        );
        match load_price_csv(&p) {
            Err(DataError::NonPositivePrice { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "C.csv",
            "date,close\n2020-01-01,100\n2020-13-02,101\n",
        );
        assert!(matches!(
            load_price_csv(&p),
            Err(DataError::MalformedRow { line: 3, .. })
        ));
        let p = write_tmp(
            &dir,
            "D.csv",
            "date,close\n2020-01-01,100\n2020-01-02,abc\n",
        );
        assert!(matches!(
            load_price_csv(&p),
            Err(DataError::MalformedRow { line: 3, .. })
        ));
        let p = write_tmp(
            &dir,
            "E.csv",
            "date,close\n2020-01-02,100\n2020-01-01,101\n2020-01-02,99\n",
        );
        assert!(matches!(
            load_price_csv(&p),
            Err(DataError::DuplicateDate { line: 4, .. })
        ));
        let p = write_tmp(&dir, "F.csv", "day,price\n2020-01-02,100\n");
        assert!(matches!(
            load_price_csv(&p),
            Err(DataError::BadHeader { .. })
        ));
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [
            ("2020-01-03", 102.0),
            ("2020-01-01", 100.0),
            ("2020-01-05", 99.5),
            ("2020-01-02", 101.0),
        ];
        let mut body = String::from("date,close\n");
        for (dt, p) in rows {
            body.push_str(&format!("{dt},{p}\n"));
        }
        let p = write_tmp(&dir, "G.csv", &body);
        let s = load_price_csv(&p).unwrap();
        let mut expected: Vec<(NaiveDate, f64)> = rows.iter().map(|(a, b)| (d(a), *b)).collect();
        expected.sort_by_key(|r| r.0);
        let got: Vec<(NaiveDate, f64)> = s
            .dates
            .iter()
            .copied()
            .zip(s.prices.iter().copied())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn simple_and_constant_returns() {
        let p =
            compute_returns(&[series("A", 1..=2, &[100.0, 110.0])], ReturnKind::Simple).unwrap();
        assert!((p.returns[0][0] - 0.10).abs() < 1e-15);
        let p = compute_returns(
            &[series("A", 1..=3, &[100.0, 100.0, 100.0])],
            ReturnKind::Simple,
        )
        .unwrap();
        assert_eq!(p.column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn intersection_calendar() {
        let a = series("A", 1..=5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = series("B", 2..=6, &[2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = compute_returns(&[a.clone(), b.clone()], ReturnKind::Simple).unwrap();
        // common dates d2..d5 -> 3 returns dated d3..d5
        assert_eq!(p.len(), 3);
        assert_eq!(
            p.dates,
            vec![d("2020-01-03"), d("2020-01-04"), d("2020-01-05")]
        );
        let q = compute_returns(&[b, a], ReturnKind::Simple).unwrap();
        assert_eq!(p.dates, q.dates);
        assert_eq!(p.column_by_ticker("A"), q.column_by_ticker("A"));
        assert_eq!(p.column_by_ticker("B"), q.column_by_ticker("B"));
    }

    #[test]
    fn empty_intersection() {
        let a = series("A", 1..=2, &[1.0, 2.0]);
        let b = series("B", 5..=6, &[2.0, 3.0]);
        assert!(matches!(
            compute_returns(&[a, b], ReturnKind::Log),
            Err(DataError::EmptyIntersection)
        ));
    }

    #[test]
    fn cumulative_examples() {
        let s = series("A", 1..=3, &[100.0, 110.0, 99.0]);
        let p = compute_returns(&[s], ReturnKind::Simple).unwrap();
        let w = vec![equal_weights(&p.tickers).unwrap(); 2];
        let v = cumulative_price(&p, &w, 100.0).unwrap();
        assert!((v[0] - 110.0).abs() < 1e-10 && (v[1] - 99.0).abs() < 1e-10);

        let panel = ReturnPanel::new(
            vec![d("2020-01-02")],
            vec!["A".into(), "B".into()],
            vec![vec![0.02, -0.02]],
            ReturnKind::Simple,
        )
        .unwrap();
        let w = WeightVector::new(panel.tickers.clone(), vec![0.5, 0.5], Regime::LongOnly).unwrap();
        assert!((cumulative_price(&panel, &[w.clone()], 100.0).unwrap()[0] - 100.0).abs() < 1e-12);
        assert!(matches!(
            cumulative_price(&panel, &[], 100.0),
            Err(DataError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn riskfree_forward_fill_and_coverage() {
        let panel = ReturnPanel::new(
            vec![d("2020-01-02"), d("2020-01-03"), d("2020-01-06")],
            vec!["A".into()],
            vec![vec![0.0]; 3],
            ReturnKind::Simple,
        )
        .unwrap();
        let rf =
            RiskFreeSeries::new(vec![d("2020-01-02"), d("2020-01-06")], vec![1e-4, 2e-4]).unwrap();
        let a = align_riskfree(&panel, &rf).unwrap();
        assert_eq!(a.daily_rate, vec![1e-4, 1e-4, 2e-4]);

        let rf_full = RiskFreeSeries::new(panel.dates.clone(), vec![1e-4, 3e-4, 2e-4]).unwrap();
        assert_eq!(
            align_riskfree(&panel, &rf_full).unwrap().daily_rate,
            rf_full.daily_rate
        );

        let late = RiskFreeSeries::new(vec![d("2020-01-03")], vec![1e-4]).unwrap();
        assert!(matches!(
            align_riskfree(&panel, &late),
            Err(DataError::NoCoverage { .. })
        ));
    }

    #[test]
    fn annual_percent_conversion() {
        assert!((RiskFreeSeries::annual_percent_to_daily(5.04) - 0.0002).abs() < 1e-15);
    }

    #[test]
    fn riskfree_csv_skips_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "rf.csv",
            "date,annual_rate_percent\n2020-01-01,2.52\n2020-01-02,.\n2020-01-03,5.04\n",
        );
        let rf = load_riskfree_csv(&p).unwrap();
        assert_eq!(rf.dates.len(), 2);
        assert!((rf.daily_rate[0] - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn manifest_parsing() {
        let m = parse_manifest(
            "# universe\nVWO = data/VWO.csv\nEEM data/EEM.csv  # comment\n\n",
            Path::new("/base"),
            "m",
        )
        .unwrap();
        assert_eq!(
            m[0],
            ("VWO".to_string(), PathBuf::from("/base/data/VWO.csv"))
        );
        assert_eq!(m[1].0, "EEM");
        assert!(parse_manifest("VWO\n", Path::new("."), "m").is_err());
        assert!(parse_manifest("A = x\nA = y\n", Path::new("."), "m").is_err());
    }
}
