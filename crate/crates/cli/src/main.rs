//! `portopt`: batch front end writing CSV tables and SVG charts.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

mod commands;
mod config;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use portopt::backtest::Mode;
use serde::{Deserialize, Serialize};

use commands::{CliError, Context};
use config::Config;

#[derive(Parser, Debug)]
#[command(
    name = "portopt",
    version,
    about = "Rolling-window portfolio optimization toolkit"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "portopt.toml")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `backtest.mode`.
    #[arg(long, global = true, value_parser = ["historical", "dynamic"])]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Load the price manifest and write the aligned return panel.
    Ingest,
    /// Rolling-window backtest of every configured strategy.
    Backtest,
    /// Efficient frontiers, asset scatter and capital market line.
    Frontier,
    /// Hill tail curves and robust benchmark regressions.
    Diagnose,
    /// Check a ratio table against the configured reference values.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Backtest => "backtest",
            Command::Frontier => "frontier",
            Command::Diagnose => "diagnose",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RunManifest {
    config_path: String,
    output_dir: String,
    commands_run: Vec<String>,
    seed: u64,
    toolkit_version: String,
}

/// Appends this invocation to `run_manifest.toml`, starting a new list when
/// the config or seed changed.
fn record_run(ctx: &Context, config_path: &Path, command: &str) -> Result<(), CliError> {
    let path = ctx.out.join("run_manifest.toml");
    let mut manifest = RunManifest {
        config_path: config_path.display().to_string(),
        output_dir: ctx.out.display().to_string(),
        commands_run: Vec::new(),
        seed: ctx.seed,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(prev) = toml::from_str::<RunManifest>(&text) {
            if prev.config_path == manifest.config_path && prev.seed == manifest.seed {
                manifest.commands_run = prev.commands_run;
            }
        }
    }
    manifest.commands_run.push(command.to_string());
    let text = toml::to_string(&manifest).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&ctx.out)
        .and_then(|_| std::fs::write(&path, text))
        .map_err(|e| CliError::Runtime {
            module: "cli-report",
            date: None,
            message: format!("{}: {e}", path.display()),
        })
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = Config::load(&cli.config).map_err(CliError::Usage)?;
    let mode = match cli.mode.as_deref() {
        Some(m) => m
            .parse::<Mode>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => cfg.backtest.mode,
    };
    let ctx = Context {
        seed: cli.seed.unwrap_or(cfg.seed),
        out: cli.out.clone(),
        mode,
        cfg,
    };
    let label = match cli.command {
        Command::Backtest | Command::Report => format!("{} --mode {mode}", cli.command.name()),
        c => c.name().to_string(),
    };
    let msg = match cli.command {
        Command::Ingest => commands::ingest(&ctx),
        Command::Backtest => commands::backtest(&ctx),
        Command::Frontier => commands::frontier(&ctx),
        Command::Diagnose => commands::diagnose(&ctx),
        Command::Report => commands::report(&ctx),
    }?;
    record_run(&ctx, &cli.config, &label)?;
    Ok(msg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("portopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
