use std::path::{Path, PathBuf};
use std::process::ExitCode;

use balpa_bench::config::ExperimentConfig;
use balpa_bench::dist::run_dist_experiment;
use balpa_bench::error::{BenchError, Result};
use balpa_bench::experiment::{build_instance, run_experiment, solve, trace_path, StdClock};
use balpa_bench::gen::write_instance;
use balpa_bench::trace::{read_columns, write_trace};
use balpa_core::rates::{tail_slope, MIN_WINDOW};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "balpa", version, about = "Run and compare primal-dual splitting solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Use this single seed instead of the configured ones.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_epochs: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the configured instances as text files.
    Gen(Common),
    /// Run one solver on one seed and print its report.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solver section to run; required when several are configured.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Run every configured solver on every seed.
    Race(Common),
    /// Run the decentralized method on an agent network.
    Dist(Common),
    /// Fit a log-log slope to two trace columns.
    Slopes {
        /// Trace CSV files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "iter")]
        x: String,
        #[arg(long, default_value = "ergodic_gap")]
        y: String,
        /// Smallest x in the tail window.
        #[arg(long, default_value_t = 100.0)]
        from: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        to: f64,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
        cfg.seeds = None;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(t) = c.tol {
        cfg.tol = t;
    }
    if c.max_epochs.is_some() {
        cfg.max_epochs = c.max_epochs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gen(c: &Common) -> Result<ExitCode> {
    let cfg = load(c)?;
    for seed in cfg.seed_list() {
        let dir = write_instance(&cfg.problem, seed, &cfg.out)?;
        println!("instance={}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn solve_one(c: &Common, solver: Option<&str>) -> Result<ExitCode> {
    let cfg = load(c)?;
    let name = match solver {
        Some(s) => s.to_string(),
        None if cfg.solvers.len() == 1 => cfg.solvers.keys().next().cloned().unwrap_or_default(),
        None => return Err(BenchError::Config("several solvers configured; pick one with --solver".into())),
    };
    let entry = cfg.solvers.get(&name).ok_or_else(|| BenchError::Config(format!("no [solvers.{name}] section")))?;
    let seed = cfg.seed_list()[0];
    let inst = build_instance(&cfg.problem, seed)?;
    let rep = solve(&name, entry, &cfg, &inst, &StdClock::start())?;
    let path = trace_path(&cfg.out, &name, seed);
    write_trace(&path, &rep.trace)?;
    println!("seed={seed}");
    for (k, v) in rep.summary_pairs() {
        println!("{k}={v}");
    }
    println!("trace={}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn race(c: &Common) -> Result<ExitCode> {
    let cfg = load(c)?;
    let rep = run_experiment(&cfg)?;
    for o in &rep.outcomes {
        let epochs = o.report.as_ref().map_or_else(|e| e.clone(), |r| r.epochs.to_string());
        println!("solver={} seed={} status={} epochs={epochs}", o.solver, o.seed, o.status());
    }
    println!("summary={}", rep.out.join("summary.txt").display());
    Ok(if rep.any_dnf() { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn dist(c: &Common) -> Result<ExitCode> {
    let cfg = load(c)?;
    if !cfg.is_dist() {
        return Err(BenchError::Config("dist needs a problem of kind \"dist\"".into()));
    }
    for o in run_dist_experiment(&cfg)? {
        let last = o.report.trace.last().expect("trace has the initial record");
        println!(
            "seed={} status={} rounds={} consensus_violation={:e} distance={:e} messages_sent={}",
            o.seed,
            o.report.status.name(),
            o.report.rounds,
            last.consensus_violation,
            o.distance,
            last.messages_sent
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn slopes(traces: &[PathBuf], x: &str, y: &str, from: f64, to: f64) -> Result<ExitCode> {
    for path in traces {
        let (xs, ys) = read_columns(Path::new(path), x, y)?;
        match tail_slope(&xs, &ys, from, to) {
            Ok(s) => println!("{} slope={s:.6}", path.display()),
            Err(e) => {
                return Err(BenchError::Config(format!(
                    "{}: {e} (the window needs at least {MIN_WINDOW} positive points)",
                    path.display()
                )))
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Gen(c) => gen(c),
        Cmd::Solve { common, solver } => solve_one(common, solver.as_deref()),
        Cmd::Race(c) => race(c),
        Cmd::Dist(c) => dist(c),
        Cmd::Slopes { traces, x, y, from, to } => slopes(traces, x, y, *from, *to),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
