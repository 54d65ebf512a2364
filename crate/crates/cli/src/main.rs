use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use clustercache::checks::selftest;
use clustercache::PlacementCase;
use clustercache_cli::config::{parse_methods, Config};
use clustercache_cli::output::{meta_path, render_csv, render_meta, write_atomic};
use clustercache_cli::{reproduce_figure, rows_exit, run_sweep, Exit, FigureOptions, Metric, Row};

#[derive(Parser)]
#[command(name = "clustercache", version, about = "Coverage sweeps and figure data for clustered D2D caching")]
struct Cli {
    /// Configuration file (flat `key = value`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV destination; a `.meta` file is written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Rows evaluated concurrently.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo trials per row.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    /// Comma-separated: analytic_exact, analytic_approx, analytic_fast, monte_carlo.
    #[arg(long, global = true, value_name = "LIST")]
    methods: Option<String>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a configuration file.
    Sweep { config: Option<PathBuf> },
    /// Reproduce a figure's data and check its qualitative claims.
    Figure { name: String },
    /// Check a configuration without evaluating anything.
    Validate { config: Option<PathBuf> },
    /// Run the built-in invariant checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Sweep { config } => sweep(&cli, config.as_ref().or(cli.config.as_ref()), false),
        Command::Validate { config } => sweep(&cli, config.as_ref().or(cli.config.as_ref()), true),
        Command::Figure { name } => figure(&cli, name),
        Command::Selftest => run_selftest(&cli),
    };
    ExitCode::from(code as u8)
}

fn workers(cli: &Cli) -> usize {
    cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load_config(cli: &Cli, path: Option<&PathBuf>) -> Result<Config, String> {
    let mut cfg = match path {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    cfg.apply_env(std::env::vars()).map_err(|e| format!("environment: {e}"))?;
    let flags = [
        ("sim.seed", cli.seed.map(|s| s.to_string())),
        ("sim.trials", cli.trials.map(|t| t.to_string())),
        ("sweep.methods", cli.methods.clone()),
        ("output.path", cli.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v).map_err(|e| e.to_string())?;
        }
    }
    Ok(cfg)
}

fn sweep(cli: &Cli, path: Option<&PathBuf>, dry_run: bool) -> Exit {
    let cfg = match load_config(cli, path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Validation;
        }
    };
    let spec = match cfg.to_spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Validation;
        }
    };
    if dry_run {
        let tasks = spec.tasks();
        let mut failed = 0;
        for t in &tasks {
            let case = if matches!(t.metric, Metric::HitUniform | Metric::HitClusterCentric) {
                PlacementCase::Baseline
            } else {
                t.case
            };
            if let Err(e) = t.params.validate(&case) {
                failed += 1;
                eprintln!("row {} (x = {}): {e}", t.curve, t.x);
            }
        }
        if !cli.quiet {
            println!("{} rows, {failed} invalid", tasks.len());
        }
        return if failed == 0 { Exit::Success } else { Exit::Validation };
    }
    let start = Instant::now();
    let rows = match run_sweep(&spec, workers(cli)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Validation;
        }
    };
    let mut meta = vec![("command".to_string(), "sweep".to_string())];
    meta.extend(cfg.entries().map(|(k, v)| (format!("config.{k}"), v.to_string())));
    meta.push(("wall_seconds".into(), format!("{:.3}", start.elapsed().as_secs_f64())));
    if let Err(e) = emit(cli, spec.output.as_ref(), &rows, &meta) {
        eprintln!("error: {e}");
        return Exit::Validation;
    }
    report_rows(cli, &rows);
    rows_exit(&rows)
}

fn figure(cli: &Cli, name: &str) -> Exit {
    let methods = match cli.methods.as_deref().map(parse_methods).transpose() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: --methods: {e}");
            return Exit::Validation;
        }
    };
    let defaults = FigureOptions::default();
    let opts = FigureOptions {
        seed: cli.seed.unwrap_or(defaults.seed),
        trials: cli.trials.unwrap_or(defaults.trials),
        methods,
        workers: workers(cli),
    };
    let start = Instant::now();
    let run = match reproduce_figure(name, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Validation;
        }
    };
    let mut meta = vec![
        ("command".to_string(), "figure".to_string()),
        ("figure".into(), name.to_string()),
        ("seed".into(), opts.seed.to_string()),
        ("trials".into(), opts.trials.to_string()),
        ("workers".into(), opts.workers.to_string()),
        ("wall_seconds".into(), format!("{:.3}", start.elapsed().as_secs_f64())),
    ];
    for (i, c) in run.checks.iter().enumerate() {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        meta.push((format!("check.{i}"), format!("{verdict} {}: {}", c.name, c.detail)));
    }
    if let Err(e) = emit(cli, cli.out.as_ref(), &run.rows, &meta) {
        eprintln!("error: {e}");
        return Exit::Validation;
    }
    report_rows(cli, &run.rows);
    if !cli.quiet {
        for c in &run.checks {
            eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    match rows_exit(&run.rows) {
        Exit::Success if !run.passed() => Exit::Assertion,
        e => e,
    }
}

fn run_selftest(cli: &Cli) -> Exit {
    let results = selftest();
    let mut ok = true;
    for c in &results {
        ok &= c.passed;
        if !cli.quiet || !c.passed {
            println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if ok {
        Exit::Success
    } else {
        Exit::Assertion
    }
}

/// CSV to `path` (atomically, with metadata alongside) or to stdout.
fn emit(cli: &Cli, path: Option<&PathBuf>, rows: &[Row], meta: &[(String, String)]) -> std::io::Result<()> {
    let csv = render_csv(rows);
    match path {
        Some(p) => {
            write_atomic(p, csv.as_bytes())?;
            write_atomic(&meta_path(p), render_meta(meta, rows).as_bytes())?;
            if !cli.quiet {
                eprintln!("wrote {} rows to {}", rows.len(), p.display());
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn report_rows(cli: &Cli, rows: &[Row]) {
    if cli.quiet {
        return;
    }
    for r in rows {
        if let Err(e) = &r.outcome {
            eprintln!("row {} x={} {}: {e}", r.task.curve, r.task.x, r.task.method);
        }
    }
}
