use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use portopt::cvar::{max_starr_portfolio, min_cvar_portfolio};
use portopt::dynamic::garch::simulate_ag;
use portopt::dynamic::{fit_ag, fit_joint, simulate_scenarios};
use portopt::market_data::compute_returns;
use portopt::mean_variance::{estimate_moments, min_variance_portfolio, tangency_portfolio};
use portopt::synthetic::{generate, SyntheticSpec};
use portopt::tail::{hill_curve, TailSide};
use portopt::{AgParams, CvarProblem, Regime, ReturnKind};

fn window(n_assets: usize, rows: usize) -> (Vec<Vec<f64>>, Vec<String>) {
    let market = generate(&SyntheticSpec {
        n_assets,
        n_days: rows + 1,
        seed: 11,
        ..SyntheticSpec::default()
    });
    let panel = compute_returns(&market.prices, ReturnKind::Simple).unwrap();
    (panel.returns, panel.tickers)
}

fn mean_variance(c: &mut Criterion) {
    let (rows, tickers) = window(30, 1008);
    let m = estimate_moments(&rows, &tickers).unwrap();
    let mut g = c.benchmark_group("mean_variance_n30");
    g.bench_function("moments", |b| {
        b.iter(|| estimate_moments(black_box(&rows), &tickers))
    });
    g.bench_function("mvp_long_only", |b| {
        b.iter(|| min_variance_portfolio(black_box(&m), Regime::LongOnly))
    });
    g.bench_function("tangency_long_only", |b| {
        b.iter(|| tangency_portfolio(black_box(&m), 0.0, Regime::LongOnly))
    });
    g.finish();
}

fn cvar(c: &mut Criterion) {
    let (rows, tickers) = window(10, 2000);
    let mut g = c.benchmark_group("cvar_n10_s2000");
    g.sample_size(10);
    for regime in [Regime::LongOnly, Regime::LongShort] {
        let p = CvarProblem::new(&rows, tickers.clone(), 0.95, 0.0, regime);
        g.bench_function(format!("min_cvar_{regime:?}"), |b| {
            b.iter(|| min_cvar_portfolio(black_box(&p)))
        });
        g.bench_function(format!("max_starr_{regime:?}"), |b| {
            b.iter(|| max_starr_portfolio(black_box(&p)))
        });
    }
    g.finish();
}

fn dynamic(c: &mut Criterion) {
    let params = AgParams {
        delta0: 0.0,
        ar1: 0.1,
        ma1: -0.05,
        alpha0: 1e-6,
        alpha1: 0.08,
        beta1: 0.90,
        nu: 6.0,
        loglik: f64::NAN,
    };
    let path = simulate_ag(&params, 1008, 500, 3);
    let (rows, _) = window(10, 1008);
    let columns: Vec<Vec<f64>> = (0..10)
        .map(|i| rows.iter().map(|r| r[i]).collect())
        .collect();
    let (states, copula) = fit_joint(&columns, None).unwrap();
    let mut g = c.benchmark_group("dynamic");
    g.sample_size(10);
    g.bench_function("fit_ag_1008", |b| b.iter(|| fit_ag(black_box(&path))));
    g.bench_function("fit_joint_n10_1008", |b| {
        b.iter(|| fit_joint(black_box(&columns), None))
    });
    g.bench_function("scenarios_n10_s2000", |b| {
        b.iter(|| simulate_scenarios(&copula, black_box(&states), 2000, 5, 1008))
    });
    g.finish();
}

fn hill(c: &mut Criterion) {
    let (rows, _) = window(1, 5000);
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    c.bench_function("hill_n5000_k500", |b| {
        b.iter(|| hill_curve(black_box(&x), TailSide::Loss, 500))
    });
}

criterion_group!(benches, mean_variance, cvar, dynamic, hill);
criterion_main!(benches);
