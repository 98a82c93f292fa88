use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use portopt::backtest::{self, BacktestRun, Mode};
use portopt::io::{self as pio, create};
use portopt::market_data::{self, align_riskfree};
use portopt::mean_variance::{self, FrontierCurve, FrontierPoint};
use portopt::robust::benchmark_panel_fit;
use portopt::tail::{default_k_max, hill_curve, tail_sample, TailSide};
use portopt::{BacktestConfig, PriceSeries, Regime, ReturnKind, ReturnPanel, RiskFreeSeries};

use crate::config::Config;
use crate::svg::{self, Chart, Mark};

/// Metrics carried into the cross-mode comparison.
pub const COMPARISON_METRICS: [&str; 3] = ["sharpe", "calmar", "starr95"];

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or missing inputs; exit code 2.
    Usage(String),
    /// A module failed at run time; exit code 3.
    Runtime {
        module: &'static str,
        date: Option<NaiveDate>,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime { .. } => 3,
        }
    }

    fn runtime(module: &'static str, message: impl fmt::Display) -> Self {
        CliError::Runtime {
            module,
            date: None,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::runtime("cli-report", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime {
                module,
                date: Some(d),
                message,
            } => write!(f, "{module} failed (window ending {d}): {message}"),
            CliError::Runtime {
                module, message, ..
            } => write!(f, "{module} failed: {message}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub mode: Mode,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<fs::File>) -> std::io::Result<()>,
{
    let w = create(path).map_err(|e| CliError::io(path, e))?;
    f(w).map_err(|e| CliError::io(path, e))
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Loads every manifest entry, reporting all failing files at once.
pub fn load_prices(cfg: &Config) -> Result<Vec<PriceSeries>> {
    let manifest = cfg.resolve(&cfg.data.manifest);
    let entries = market_data::load_manifest(&manifest).map_err(|e| match e {
        market_data::DataError::Io { .. } => CliError::Usage(e.to_string()),
        other => CliError::runtime("market-data", other),
    })?;
    if entries.is_empty() {
        return Err(CliError::Usage(format!(
            "manifest {} lists no tickers",
            manifest.display()
        )));
    }
    let mut series = Vec::with_capacity(entries.len());
    let mut failures = Vec::new();
    for (ticker, path) in entries {
        match market_data::load_price_csv_as(&path, ticker) {
            Ok(s) => series.push(s.restrict(cfg.data.start, cfg.data.end)),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::runtime("market-data", failures.join("; ")));
    }
    Ok(series)
}

fn build_panel(cfg: &Config) -> Result<ReturnPanel> {
    let series = load_prices(cfg)?;
    market_data::compute_returns(&series, cfg.data.return_kind)
        .map_err(|e| CliError::runtime("market-data", e))
}

pub fn ingest(ctx: &Context) -> Result<String> {
    let panel = build_panel(&ctx.cfg)?;
    let path = ctx.out.join("panel.csv");
    write_with(&path, |w| pio::write_panel(w, &panel))?;
    let kind = match panel.kind {
        ReturnKind::Simple => "simple",
        ReturnKind::Log => "log",
    };
    let summary = format!(
        "rows = {}\nassets = {}\nfirst_date = {}\nlast_date = {}\nreturn_kind = \"{kind}\"\ntickers = [{}]\n",
        panel.len(),
        panel.n_assets(),
        panel.dates[0],
        panel.dates[panel.len() - 1],
        panel
            .tickers
            .iter()
            .map(|t| format!("\"{t}\""))
            .collect::<Vec<_>>()
            .join(", ")
    );
    write_file(&ctx.out.join("summary.toml"), &summary)?;
    Ok(format!(
        "panel: T={} N={} {}..{}",
        panel.len(),
        panel.n_assets(),
        panel.dates[0],
        panel.dates[panel.len() - 1]
    ))
}

/// The ingested panel, or a fresh one when `ingest` has not been run.
pub fn panel(ctx: &Context) -> Result<ReturnPanel> {
    let path = ctx.out.join("panel.csv");
    if path.exists() {
        pio::read_panel(&path, ctx.cfg.data.return_kind)
            .map_err(|e| CliError::runtime("market-data", e))
    } else {
        log::info!(
            "{} missing; building the panel from the manifest",
            path.display()
        );
        build_panel(&ctx.cfg)
    }
}

/// Daily rates on the panel calendar; zero when no series is configured.
pub fn riskfree(ctx: &Context, panel: &ReturnPanel) -> Result<RiskFreeSeries> {
    match &ctx.cfg.data.riskfree {
        Some(p) => {
            let path = ctx.cfg.resolve(p);
            let rf = market_data::load_riskfree_csv(&path)
                .map_err(|e| CliError::runtime("market-data", e))?;
            align_riskfree(panel, &rf).map_err(|e| CliError::runtime("market-data", e))
        }
        None => {
            log::warn!("no risk-free series configured; using a zero rate");
            Ok(RiskFreeSeries::constant(&panel.dates, 0.0))
        }
    }
}

fn date_axis(dates: &[NaiveDate]) -> Vec<(f64, String)> {
    if dates.is_empty() {
        return Vec::new();
    }
    let step = (dates.len() / 6).max(1);
    (0..dates.len())
        .step_by(step)
        .map(|i| (i as f64, dates[i].to_string()))
        .collect()
}

fn cumulative_chart(run: &BacktestRun, title: &str) -> Chart {
    let mut ch = Chart::new(title, "date", "value");
    ch.x_labels = Some(date_axis(run.dates()));
    let mut k = 0;
    for r in &run.results {
        let is_bench = r.strategy.label() == "EWP";
        let pts = r
            .prices
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64, *p))
            .collect();
        let (col, width) = if is_bench {
            ("#000000", 2.5)
        } else {
            k += 1;
            (svg::color(k - 1), 1.0)
        };
        ch.push(svg::line(r.strategy.label(), pts, col, width));
    }
    ch
}

fn log_return_grid(run: &BacktestRun) -> String {
    let charts: Vec<Chart> = run
        .results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut ch = Chart::new(r.strategy.label(), "date", "log return");
            ch.width = 420.0;
            ch.height = 240.0;
            ch.legend = false;
            ch.x_labels = Some(date_axis(&r.dates).into_iter().step_by(2).collect());
            let pts = r
                .returns
                .iter()
                .enumerate()
                .map(|(i, x)| (i as f64, (1.0 + x).ln()))
                .collect();
            ch.push(svg::line("", pts, svg::color(k), 0.6));
            ch
        })
        .collect();
    svg::grid(&charts, 3)
}

pub fn backtest(ctx: &Context) -> Result<String> {
    let panel = panel(ctx)?;
    let rf = riskfree(ctx, &panel)?;
    let section = &ctx.cfg.backtest;
    let wanted = section.strategy_specs().map_err(CliError::Usage)?;
    let mut strategies = wanted.clone();
    if !strategies.iter().any(|s| s.label() == "EWP") {
        strategies.insert(0, portopt::StrategySpec::ewp());
    }
    let config = BacktestConfig {
        window_length: section.window_length,
        strategies,
        mode: ctx.mode,
        scenario_count: section.scenario_count,
        seed: ctx.seed,
        refit_every: section.refit_every,
        initial: section.initial,
        box_bound: section.box_bound,
        gross_bound: section.gross_bound,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let run = backtest::run_backtest(&panel, &rf, &config).map_err(|e| CliError::Runtime {
        module: "backtest-engine",
        date: panel
            .dates
            .get(section.window_length.saturating_sub(1))
            .copied(),
        message: e.to_string(),
    })?;
    let bench = run.get("EWP").expect("EWP always runs");
    let rows = backtest::compare_to_benchmark(&run.results, bench, &run.rf)
        .map_err(|e| CliError::runtime("backtest-engine", e))?;

    let dir = ctx.out.join(ctx.mode.to_string());
    let kept: Vec<_> = run
        .results
        .iter()
        .filter(|r| wanted.contains(&r.strategy))
        .cloned()
        .collect();
    write_with(&dir.join("results.csv"), |w| pio::write_results(w, &kept))?;
    for r in &kept {
        let path = dir
            .join("weights")
            .join(format!("{}.csv", file_safe(&r.strategy.label())));
        write_with(&path, |w| pio::write_weights(w, r))?;
    }
    write_with(&dir.join("ratios.csv"), |w| {
        pio::write_ratio_table(w, &rows)
    })?;
    let warnings: Vec<_> = run.results.iter().flat_map(|r| r.warnings.iter()).collect();
    write_with(&dir.join("warnings.csv"), |w| {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["date", "strategy", "message"])?;
        for ev in &warnings {
            out.write_record([ev.date.to_string(), ev.strategy.clone(), ev.message.clone()])?;
        }
        out.flush()
    })?;
    if ctx.mode == Mode::Dynamic {
        write_with(&dir.join("fits.csv"), |w| {
            pio::write_fits(w, &run.tickers, &run.fits)
        })?;
    }
    let title = format!("Cumulative value, {} optimization", ctx.mode);
    write_file(
        &dir.join("cumulative.svg"),
        &cumulative_chart(&run, &title).to_svg(),
    )?;
    write_file(&dir.join("log_returns.svg"), &log_return_grid(&run))?;

    let mut msg = format!(
        "{} backtest: {} strategies over {} days, {} warnings",
        ctx.mode,
        kept.len(),
        run.dates().len(),
        warnings.len()
    );
    if let Some(n) = mode_comparison(&ctx.out)? {
        msg.push_str(&format!("; mode_comparison.csv written ({n} strategies)"));
    }
    Ok(msg)
}

/// `(portfolio, metric) -> value` from a `ratios.csv`, portfolios in file
/// order.
pub fn read_ratio_table(path: &Path) -> Result<(Vec<String>, BTreeMap<(String, String), f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut order = Vec::new();
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        if rec.len() < 3 {
            return Err(CliError::io(path, "expected portfolio,metric,value"));
        }
        let p = rec[0].trim().replace(' ', "_");
        let v: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|e| CliError::io(path, format!("{}: {e}", &rec[2])))?;
        if !order.contains(&p) {
            order.push(p.clone());
        }
        map.insert((p, rec[1].trim().to_string()), v);
    }
    Ok((order, map))
}

/// Writes `mode_comparison.csv` and its charts once both modes have ratio
/// tables. Returns the number of strategies compared.
pub fn mode_comparison(out: &Path) -> Result<Option<usize>> {
    let h = out.join("historical").join("ratios.csv");
    let d = out.join("dynamic").join("ratios.csv");
    if !(h.exists() && d.exists()) {
        return Ok(None);
    }
    let (order, hist) = read_ratio_table(&h)?;
    let (_, dynm) = read_ratio_table(&d)?;
    let shared: Vec<String> = order
        .into_iter()
        .filter(|p| dynm.keys().any(|(q, _)| q == p))
        .collect();
    let get = |m: &BTreeMap<(String, String), f64>, p: &str, metric: &str| {
        m.get(&(p.to_string(), metric.to_string()))
            .copied()
            .unwrap_or(f64::NAN)
    };
    let path = out.join("mode_comparison.csv");
    write_with(&path, |w| {
        let mut o = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        o.write_record(["metric", "strategy", "historical", "dynamic"])?;
        for m in COMPARISON_METRICS {
            for p in &shared {
                o.write_record([
                    m.to_string(),
                    p.clone(),
                    format!("{}", get(&hist, p, m)),
                    format!("{}", get(&dynm, p, m)),
                ])?;
            }
        }
        o.flush()
    })?;
    for m in COMPARISON_METRICS {
        let series = vec![
            (
                "historical".to_string(),
                shared.iter().map(|p| get(&hist, p, m)).collect(),
            ),
            (
                "dynamic".to_string(),
                shared.iter().map(|p| get(&dynm, p, m)).collect(),
            ),
        ];
        let chart = svg::grouped_bars(&format!("Historical vs. dynamic {m}"), &shared, &series, m);
        write_file(&out.join(format!("mode_comparison_{m}.svg")), &chart)?;
    }
    Ok(Some(shared.len()))
}

/// Return of the upper frontier branch at standard deviation `sd`, if the
/// frontier reaches it.
fn frontier_return_at(c: &portopt::FrontierCoefficients, sd: f64) -> Option<f64> {
    let disc = c.delta * (c.b * sd * sd - 1.0);
    (disc >= 0.0).then(|| (c.c + disc.sqrt()) / c.b)
}

pub fn frontier(ctx: &Context) -> Result<String> {
    let panel = panel(ctx)?.to_simple();
    let rf = riskfree(ctx, &panel)?;
    let rf_mean = rf.daily_rate.iter().sum::<f64>() / rf.daily_rate.len().max(1) as f64;
    let mv_err = |e: mean_variance::OptimError| CliError::runtime("mean-variance", e);
    let m = mean_variance::estimate_moments(&panel.returns, &panel.tickers).map_err(mv_err)?;
    let coeffs = mean_variance::frontier_coefficients(&m).map_err(mv_err)?;
    let n_points = ctx.cfg.frontier.points.max(2);
    let ls = mean_variance::frontier_curve(&m, n_points, Regime::LongShort).map_err(mv_err)?;
    let lo = mean_variance::frontier_curve(&m, n_points, Regime::LongOnly).map_err(mv_err)?;
    write_with(&ctx.out.join("frontier_long_short.csv"), |w| {
        pio::write_frontier(w, &ls.points)
    })?;
    write_with(&ctx.out.join("frontier_long_only.csv"), |w| {
        pio::write_frontier(w, &lo.points)
    })?;

    let n = panel.n_assets();
    let ewp_returns: Vec<f64> = panel
        .returns
        .iter()
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let ewp_mean = ewp_returns.iter().sum::<f64>() / ewp_returns.len() as f64;
    let ewp_sd = {
        let ones = vec![1.0 / n as f64; n];
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += ones[i] * m.cov[(i, j)] * ones[j];
            }
        }
        v.max(0.0).sqrt()
    };
    let mut assets: Vec<(String, f64, f64)> = (0..n)
        .map(|i| (panel.tickers[i].clone(), m.mean[i], m.cov[(i, i)].sqrt()))
        .collect();
    assets.push(("EWP".into(), ewp_mean, ewp_sd));
    for name in &ctx.cfg.frontier.markers {
        if panel.tickers.contains(name) {
            continue;
        }
        let s = named_series(ctx, &panel, name)?;
        let (_, x) = align(&panel, &s, name);
        if x.len() < 2 {
            return Err(CliError::runtime(
                "market-data",
                format!("{name} shares fewer than two dates with the panel"),
            ));
        }
        let mu = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (x.len() - 1) as f64;
        assets.push((name.clone(), mu, var.sqrt()));
    }
    let mut below = Vec::new();
    write_with(&ctx.out.join("assets.csv"), |w| {
        let mut o = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        o.write_record(["name", "mean", "stdev", "frontier_return", "below_frontier"])?;
        for (name, mu, sd) in &assets {
            let f = frontier_return_at(&coeffs, *sd);
            let is_below = f.map(|f| *mu < f - 1e-12 * f.abs().max(1e-12));
            if is_below == Some(true) && (ctx.cfg.frontier.markers.contains(name) || name == "EWP")
            {
                below.push(name.clone());
            }
            o.write_record([
                name.clone(),
                format!("{mu}"),
                format!("{sd}"),
                f.map(|v| format!("{v}")).unwrap_or_default(),
                is_below.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        o.flush()
    })?;

    let max_sd = assets
        .iter()
        .map(|a| a.2)
        .chain(lo.points.iter().map(|p| p.stdev))
        .fold(0.0, f64::max)
        * 1.1;
    let tangency = mean_variance::tangency_portfolio(&m, rf_mean, Regime::LongShort);
    let cml = match &tangency {
        Ok(t) => mean_variance::capital_market_line(t, rf_mean).ok(),
        Err(e) => {
            log::warn!("no long-short tangency portfolio: {e}");
            None
        }
    };
    if let Some(cml) = &cml {
        let top = max_sd.max(tangency.as_ref().map(|t| t.stdev).unwrap_or(0.0));
        write_with(&ctx.out.join("cml.csv"), |w| {
            pio::write_cml(w, cml, n_points, top)
        })?;
    }
    let chart = frontier_chart(
        &ls,
        &lo,
        &assets,
        &ctx.cfg.frontier.markers,
        cml.as_ref(),
        max_sd,
    );
    write_file(&ctx.out.join("frontier.svg"), &chart.to_svg())?;
    let mut msg = format!(
        "frontier: {} long-short and {} long-only points, rf {rf_mean:.3e}/day",
        ls.points.len(),
        lo.points.len()
    );
    if !below.is_empty() {
        msg.push_str(&format!("; below the frontier: {}", below.join(", ")));
    }
    Ok(msg)
}

fn frontier_chart(
    ls: &FrontierCurve,
    lo: &FrontierCurve,
    assets: &[(String, f64, f64)],
    markers: &[String],
    cml: Option<&mean_variance::CapitalMarketLine>,
    max_sd: f64,
) -> Chart {
    let pts = |c: &[FrontierPoint]| -> Vec<(f64, f64)> {
        c.iter()
            .filter(|p| p.stdev <= max_sd)
            .map(|p| (p.stdev, p.target_return))
            .collect()
    };
    let mut ch = Chart::new(
        "Efficient frontier",
        "daily standard deviation",
        "daily mean return",
    );
    ch.push(svg::line(
        "long-short frontier",
        pts(&ls.points),
        svg::color(0),
        2.0,
    ));
    ch.push(svg::line(
        "long-only frontier",
        pts(&lo.points),
        svg::color(2),
        2.0,
    ));
    if let Some(l) = cml {
        ch.push(Mark::Line {
            label: "CML".into(),
            points: vec![(0.0, l.at(0.0)), (max_sd, l.at(max_sd))],
            color: svg::color(3).into(),
            width: 1.0,
            dashed: true,
        });
    }
    let (hl, rest): (Vec<_>, Vec<_>) = assets
        .iter()
        .partition(|a| a.0 == "EWP" || markers.contains(&a.0));
    ch.push(Mark::Points {
        label: "assets".into(),
        points: rest.iter().map(|a| (a.2, a.1)).collect(),
        color: "#7f7f7f".into(),
        radius: 3.0,
        tags: rest.iter().map(|a| a.0.clone()).collect(),
    });
    ch.push(Mark::Points {
        label: "highlighted".into(),
        points: hl.iter().map(|a| (a.2, a.1)).collect(),
        color: "#000000".into(),
        radius: 5.0,
        tags: hl.iter().map(|a| a.0.clone()).collect(),
    });
    ch
}

/// A named daily simple-return series on (a subset of) the panel calendar.
struct Series {
    dates: Vec<NaiveDate>,
    returns: Vec<f64>,
}

fn named_series(ctx: &Context, panel: &ReturnPanel, name: &str) -> Result<Series> {
    if name == "EWP" {
        let n = panel.n_assets() as f64;
        return Ok(Series {
            dates: panel.dates.clone(),
            returns: panel
                .returns
                .iter()
                .map(|r| r.iter().sum::<f64>() / n)
                .collect(),
        });
    }
    if let Some(col) = panel.column_by_ticker(name) {
        return Ok(Series {
            dates: panel.dates.clone(),
            returns: col,
        });
    }
    let Some(path) = ctx.cfg.diagnose.extra.get(name) else {
        return Err(CliError::Usage(format!(
            "series {name} is neither EWP, a panel ticker, nor listed under [diagnose.extra]"
        )));
    };
    let s = market_data::load_price_csv_as(ctx.cfg.resolve(path), name)
        .map_err(|e| CliError::runtime("market-data", e))?
        .restrict(ctx.cfg.data.start, ctx.cfg.data.end);
    let p = market_data::compute_returns(&[s], ReturnKind::Simple)
        .map_err(|e| CliError::runtime("market-data", e))?;
    Ok(Series {
        returns: p.column(0),
        dates: p.dates,
    })
}

/// Panel rows and benchmark values on the dates both have.
/// Rows of `panel` on dates where `s` has a value, without the column named
/// like `s` itself.
fn align(panel: &ReturnPanel, s: &Series, name: &str) -> (ReturnPanel, Vec<f64>) {
    let keep: Vec<usize> = (0..panel.n_assets())
        .filter(|&i| panel.tickers[i] != name)
        .collect();
    let by_date: BTreeMap<NaiveDate, f64> = s
        .dates
        .iter()
        .copied()
        .zip(s.returns.iter().copied())
        .collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut bench = Vec::new();
    for (d, r) in panel.dates.iter().zip(&panel.returns) {
        if let Some(v) = by_date.get(d) {
            dates.push(*d);
            rows.push(keep.iter().map(|&i| r[i]).collect());
            bench.push(*v);
        }
    }
    let sub = ReturnPanel {
        dates,
        tickers: keep.iter().map(|&i| panel.tickers[i].clone()).collect(),
        returns: rows,
        kind: panel.kind,
    };
    (sub, bench)
}

pub fn diagnose(ctx: &Context) -> Result<String> {
    let panel = panel(ctx)?.to_simple();
    let d = &ctx.cfg.diagnose;
    let mut lines = Vec::new();

    let mut overlay = Chart::new(
        format!(
            "Hill estimates, {} tail",
            match d.tail {
                TailSide::Loss => "loss",
                TailSide::Gain => "gain",
            }
        ),
        "k (upper order statistics)",
        "tail index",
    );
    for (i, name) in d.hill.iter().enumerate() {
        let s = named_series(ctx, &panel, name)?;
        let k_max = d.k_max.unwrap_or_else(|| default_k_max(s.returns.len()));
        let curve = hill_curve(&s.returns, d.tail, k_max).map_err(|e| {
            CliError::runtime(
                "tail-diagnostics",
                format!(
                    "{name} ({} tail observations): {e}",
                    tail_sample(&s.returns, d.tail).len()
                ),
            )
        })?;
        let stem = file_safe(name);
        write_with(&ctx.out.join("hill").join(format!("{stem}.csv")), |w| {
            pio::write_hill(w, &curve)
        })?;
        let xy = |v: &[f64]| -> Vec<(f64, f64)> {
            curve
                .k_values
                .iter()
                .map(|k| *k as f64)
                .zip(v.iter().copied())
                .collect()
        };
        let band = Mark::Band {
            label: String::new(),
            upper: xy(&curve.ci_high),
            lower: xy(&curve.ci_low),
            color: svg::color(i).into(),
        };
        let est = svg::line(name.clone(), xy(&curve.hill), svg::color(i), 1.5);
        let mut single = Chart::new(format!("Hill estimator: {name}"), "k", "tail index");
        single.push(band.clone()).push(est.clone());
        write_file(
            &ctx.out.join("hill").join(format!("{stem}.svg")),
            &single.to_svg(),
        )?;
        overlay.push(band).push(est);
        let mid = curve.hill.get(curve.len() / 2).copied().unwrap_or(f64::NAN);
        lines.push(format!(
            "hill {name}: k_max {k_max}, estimate at k={} is {mid:.3}",
            curve.k_values.get(curve.len() / 2).copied().unwrap_or(0)
        ));
    }
    if !d.hill.is_empty() {
        write_file(&ctx.out.join("hill").join("overlay.svg"), &overlay.to_svg())?;
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for b in &d.benchmarks {
        let s = named_series(ctx, &panel, b)?;
        let (sub, x) = align(&panel, &s, b);
        if sub.n_assets() == 0 {
            return Err(CliError::Usage(format!(
                "benchmark {b} leaves no other series to regress"
            )));
        }
        let fits = benchmark_panel_fit(&sub, &x, d.huber_tuning)
            .map_err(|e| CliError::runtime("robust-regression", format!("against {b}: {e}")))?;
        let width = fits
            .iter()
            .map(|f| f.ci95_beta.1 - f.ci95_beta.0)
            .sum::<f64>()
            / fits.len() as f64;
        summary.push((b.clone(), width, fits.len()));
        let charts: Vec<Chart> = fits
            .iter()
            .enumerate()
            .map(|(i, f)| regression_chart(&sub.tickers[i], b, &x, &sub.column(i), f))
            .collect();
        write_file(
            &ctx.out
                .join("regressions")
                .join(format!("{}.svg", file_safe(b))),
            &svg::grid(&charts, 5),
        )?;
        for (t, f) in sub.tickers.iter().zip(fits) {
            rows.push((t.clone(), b.clone(), f));
        }
    }
    write_with(&ctx.out.join("regressions").join("fits.csv"), |w| {
        pio::write_regressions(w, &rows)
    })?;
    write_with(&ctx.out.join("regressions").join("summary.csv"), |w| {
        let mut o = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        o.write_record(["benchmark", "fits", "mean_beta_ci_width"])?;
        for (b, wd, n) in &summary {
            o.write_record([b.clone(), n.to_string(), format!("{wd}")])?;
        }
        o.flush()
    })?;
    for (b, wd, n) in &summary {
        lines.push(format!(
            "regressions vs {b}: {n} fits, mean beta CI width {wd:.4}"
        ));
    }
    Ok(lines.join("\n"))
}

fn regression_chart(
    ticker: &str,
    bench: &str,
    x: &[f64],
    y: &[f64],
    f: &portopt::RobustFit,
) -> Chart {
    let mut ch = Chart::new(
        format!("{ticker} on {bench}: beta {:.3}", f.beta),
        bench,
        ticker,
    );
    ch.width = 320.0;
    ch.height = 260.0;
    ch.legend = false;
    // Thin long samples to keep files small; the stride is deterministic.
    let stride = (x.len() / 600).max(1);
    ch.push(Mark::Points {
        label: String::new(),
        points: x
            .iter()
            .zip(y)
            .step_by(stride)
            .map(|(a, b)| (*a, *b))
            .collect(),
        color: "#9ecae1".into(),
        radius: 1.2,
        tags: Vec::new(),
    });
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at = |a: f64, b: f64| vec![(lo, a + b * lo), (hi, a + b * hi)];
    ch.push(Mark::Band {
        label: String::new(),
        upper: vec![
            (
                lo,
                f.alpha
                    + lo * if lo < 0.0 {
                        f.ci95_beta.0
                    } else {
                        f.ci95_beta.1
                    },
            ),
            (0.0, f.alpha),
            (hi, f.alpha + hi * f.ci95_beta.1),
        ],
        lower: vec![
            (
                lo,
                f.alpha
                    + lo * if lo < 0.0 {
                        f.ci95_beta.1
                    } else {
                        f.ci95_beta.0
                    },
            ),
            (0.0, f.alpha),
            (hi, f.alpha + hi * f.ci95_beta.0),
        ],
        color: "#d62728".into(),
    });
    ch.push(svg::line("", at(f.alpha, f.beta), "#d62728", 1.5));
    ch
}

pub struct ReportCell {
    pub portfolio: String,
    pub metric: String,
    pub reference: f64,
    pub value: f64,
    pub rel_diff: f64,
    pub pass: bool,
}

/// Checks every reference cell against the run's ratio table.
pub fn compare_tables(
    reference: &BTreeMap<(String, String), f64>,
    ours: &BTreeMap<(String, String), f64>,
    tolerance: f64,
) -> Vec<ReportCell> {
    reference
        .iter()
        .map(|((p, m), r)| {
            let v = ours
                .get(&(p.clone(), m.clone()))
                .copied()
                .unwrap_or(f64::NAN);
            let rel = (v - r).abs() / r.abs().max(f64::MIN_POSITIVE);
            ReportCell {
                portfolio: p.clone(),
                metric: m.clone(),
                reference: *r,
                value: v,
                rel_diff: rel,
                pass: rel <= tolerance,
            }
        })
        .collect()
}

pub fn report(ctx: &Context) -> Result<String> {
    let ratios = ctx.out.join(ctx.mode.to_string()).join("ratios.csv");
    if !ratios.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `backtest --mode {}` first",
            ratios.display(),
            ctx.mode
        )));
    }
    let Some(reference) = &ctx.cfg.report.reference else {
        return Err(CliError::Usage(
            "report.reference is not set in the config".into(),
        ));
    };
    let (_, ref_table) = read_ratio_table(&ctx.cfg.resolve(reference))?;
    let (order, ours) = read_ratio_table(&ratios)?;
    let cells = compare_tables(&ref_table, &ours, ctx.cfg.report.tolerance);
    let mut lines = Vec::new();
    for c in &cells {
        lines.push(format!(
            "{} {} {}: value {:.6} reference {:.6} (relative difference {:.3})",
            if c.pass { "PASS" } else { "FAIL" },
            c.portfolio,
            c.metric,
            c.value,
            c.reference,
            c.rel_diff
        ));
    }
    let rank = |t: &BTreeMap<(String, String), f64>| {
        let mut v: Vec<(String, f64)> = order
            .iter()
            .filter_map(|p| {
                t.get(&(p.clone(), "sharpe".into()))
                    .map(|s| (p.clone(), *s))
            })
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().map(|x| x.0).collect::<Vec<_>>().join(" > ")
    };
    lines.push(format!("sharpe ranking (run):       {}", rank(&ours)));
    lines.push(format!("sharpe ranking (reference): {}", rank(&ref_table)));
    let passed = cells.iter().filter(|c| c.pass).count();
    lines.push(format!(
        "{passed}/{} cells within {:.0}%",
        cells.len(),
        ctx.cfg.report.tolerance * 100.0
    ));
    write_with(
        &ctx.out.join(ctx.mode.to_string()).join("report.csv"),
        |w| {
            let mut o = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(w);
            o.write_record([
                "portfolio",
                "metric",
                "reference",
                "value",
                "rel_diff",
                "status",
            ])?;
            for c in &cells {
                o.write_record([
                    c.portfolio.clone(),
                    c.metric.clone(),
                    format!("{}", c.reference),
                    format!("{}", c.value),
                    format!("{}", c.rel_diff),
                    if c.pass { "PASS" } else { "FAIL" }.to_string(),
                ])?;
            }
            o.flush()
        },
    )?;
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontier_branch_matches_variance_formula() {
        let c = portopt::FrontierCoefficients {
            a: 2.0,
            b: 3.0,
            c: 1.0,
            delta: 5.0,
        };
        let r = 0.9;
        let sd = c.variance_at(r).sqrt();
        assert!((frontier_return_at(&c, sd).unwrap() - r).abs() < 1e-12);
        assert!(frontier_return_at(&c, 0.1).is_none());
    }

    #[test]
    fn table_comparison() {
        let mut r = BTreeMap::new();
        r.insert(("EWP".to_string(), "sharpe".to_string()), 0.01);
        r.insert(("LS_MVP".to_string(), "sharpe".to_string()), 0.02);
        let mut o = BTreeMap::new();
        o.insert(("EWP".to_string(), "sharpe".to_string()), 0.0105);
        let cells = compare_tables(&r, &o, 0.1);
        assert!(cells[0].pass);
        assert!(!cells[1].pass && cells[1].value.is_nan());
    }

    #[test]
    fn error_messages_name_module_and_date() {
        let e = CliError::Runtime {
            module: "backtest-engine",
            date: NaiveDate::from_ymd_opt(2019, 11, 12),
            message: "boom".into(),
        };
        assert_eq!(
            e.to_string(),
            "backtest-engine failed (window ending 2019-11-12): boom"
        );
        assert_eq!(e.exit_code(), 3);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
    }
}
