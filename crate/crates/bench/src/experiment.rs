//! Solver races: one instance per seed, every configured solver on it,
//! per-run traces, an epochs-to-tolerance summary and plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use balpa_core::generators::{gen_eq_qp, gen_lasso_eq};
use balpa_core::kkt::kkt_oracle;
use balpa_core::smooth::{Quadratic, SmoothFunction};
use balpa_core::solvers::{run, Clock, Reference, SolveReport, SolverConfig, SolverKind, StopMetric, TracePolicy};
use balpa_core::stochastic::GradientEstimator;
use balpa_core::{lift_problem, CompositeProblem, LiftedProblem, LinearOperator};

use crate::config::{ExperimentConfig, ProblemConfig, SolverEntry};
use crate::error::{BenchError, Result};
use crate::io::write_text;
use crate::trace::write_trace;

/// Wall time since construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> Self {
        StdClock(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// A generated problem with its reference solution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub lp: LiftedProblem,
    pub reference: Reference,
    /// `||D^T D||` of the lifted constraint operator.
    pub norm_dd: f64,
}

/// Tolerance of the high-accuracy BALPA run used when no closed form exists.
pub const REFERENCE_TOL: f64 = 1e-12;
const REFERENCE_MAX_ITER: usize = 2_000_000;

/// Builds the centralized problem; the second value is an exact `x*` when one
/// is available.
pub fn build_problem(problem: &ProblemConfig, seed: u64) -> Result<(CompositeProblem, Option<Vec<f64>>)> {
    match *problem {
        ProblemConfig::LassoEq { n, m, p1, p2, norm_dd, ridge } => {
            let inst = gen_lasso_eq(n, m, p1, p2, norm_dd, seed)?;
            Ok((inst.problem(ridge)?, None))
        }
        ProblemConfig::Qp { n, p2 } => {
            let (h, c, d, dv) = gen_eq_qp(n, p2, seed);
            let sol = kkt_oracle(&h, &c, &d, &dv)?;
            let f: Arc<dyn SmoothFunction> = Arc::new(Quadratic::new(h, c)?);
            Ok((CompositeProblem::equality_constrained(f, LinearOperator::dense(d), dv)?, Some(sol.x)))
        }
        ProblemConfig::Dist { .. } => Err(BenchError::Config("distributed problems run under `dist`".into())),
    }
}

/// High-accuracy BALPA solution with `alpha = 1/L`, `gamma = 1`.
pub fn reference_solution(lp: &LiftedProblem) -> Result<Reference> {
    let cfg = SolverConfig::balpa(1.0 / lp.lipschitz(), 1.0)
        .with_tol(REFERENCE_TOL)
        .with_max_iter(REFERENCE_MAX_ITER)
        .with_stop_metric(StopMetric::FixedPointResidual)
        .with_trace(TracePolicy::LogSpaced { per_decade: 1 });
    let rep = run(lp, None, &cfg, None, None, &balpa_core::solvers::NoClock)?;
    if !rep.converged() {
        return Err(BenchError::Reference(format!(
            "BALPA stopped with status {} after {} iterations",
            rep.status.name(),
            rep.iterations
        )));
    }
    Ok(Reference::from_primal(lp, lp.x_block(&rep.final_state.x))?.with_dual(rep.final_state.lambda))
}

pub fn build_instance(problem: &ProblemConfig, seed: u64) -> Result<Instance> {
    let (p, exact) = build_problem(problem, seed)?;
    let lp = lift_problem(&p)?;
    let reference = match exact {
        Some(x) => Reference::from_primal(&lp, &x)?,
        None => reference_solution(&lp)?,
    };
    let norm_dd = lp.operator().op_norm_sq(1e-10, 20_000).value;
    Ok(Instance { seed, lp, reference, norm_dd })
}

/// Translates a `[solvers.<name>]` section into a solver configuration.
pub fn solver_config(name: &str, entry: &SolverEntry, cfg: &ExperimentConfig, inst: &Instance) -> Result<SolverConfig> {
    let kind = SolverKind::parse(name).ok_or_else(|| BenchError::Config(format!("unknown solver {name:?}")))?;
    let lip = inst.lp.lipschitz();
    let scale = entry.alpha_scale.unwrap_or(1.0);
    let mut sc = if kind == SolverKind::Balpa {
        let alpha = entry.alpha.unwrap_or(scale / lip);
        let mut sc = SolverConfig::balpa(alpha, entry.gamma.unwrap_or(1.0));
        if let Some(s) = entry.schedule(lip) {
            sc = sc.with_schedule(s);
        }
        sc
    } else {
        let beta = entry.beta.ok_or_else(|| BenchError::Config(format!("solver {name:?} needs beta")))?;
        let alpha = entry.alpha.unwrap_or(scale / (beta * inst.norm_dd + lip));
        SolverConfig::baseline(kind, alpha, beta)
    };
    sc.tol = cfg.tol;
    sc.max_iter = cfg.max_iter;
    sc.max_epochs = cfg.max_epochs;
    sc.stop_metric = cfg.stop_metric();
    sc.allow_unchecked_stepsize = entry.unchecked;
    sc.trace = match cfg.trace_every {
        Some(k) => TracePolicy::Every(k),
        None => TracePolicy::LogSpaced { per_decade: cfg.trace_per_decade },
    };
    Ok(sc)
}

/// Runs one solver on one instance. Stochastic estimators are seeded with the
/// instance seed.
pub fn solve(name: &str, entry: &SolverEntry, cfg: &ExperimentConfig, inst: &Instance, clock: &dyn Clock) -> Result<SolveReport> {
    let sc = solver_config(name, entry, cfg, inst)?;
    let mut est = match entry.estimator_kind()? {
        Some(k) if sc.kind == SolverKind::Balpa => Some(GradientEstimator::new(k, inst.lp.smooth().as_ref(), inst.seed)?),
        _ => None,
    };
    Ok(run(&inst.lp, None, &sc, est.as_mut(), Some(&inst.reference), clock)?)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub solver: String,
    pub seed: u64,
    /// `Err` holds the reason the run could not start.
    pub report: std::result::Result<SolveReport, String>,
    pub trace_path: PathBuf,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.report.as_ref().is_ok_and(|r| r.converged())
    }

    pub fn status(&self) -> &str {
        match &self.report {
            Ok(r) => r.status.name(),
            Err(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: String,
    pub runs: usize,
    /// Runs that did not reach the tolerance.
    pub dnf: usize,
    pub epochs_mean: f64,
    pub epochs_min: f64,
    pub epochs_max: f64,
    pub iterations_mean: f64,
}

/// Mean, min and max of the epochs at which each run stopped, over seeds.
pub fn summarize(outcomes: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = outcomes.iter().map(|o| o.solver.as_str()).collect();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let runs: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.solver == name).collect();
            let done: Vec<&SolveReport> = runs.iter().filter_map(|o| o.report.as_ref().ok()).collect();
            let epochs: Vec<f64> = done.iter().map(|r| r.epochs).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let iters: Vec<f64> = done.iter().map(|r| r.iterations as f64).collect();
            SummaryRow {
                solver: name.to_string(),
                runs: runs.len(),
                dnf: runs.iter().filter(|o| !o.converged()).count(),
                epochs_mean: mean(&epochs),
                epochs_min: epochs.iter().copied().fold(f64::NAN, f64::min),
                epochs_max: epochs.iter().copied().fold(f64::NAN, f64::max),
                iterations_mean: mean(&iters),
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub out: PathBuf,
    pub instances: Vec<(u64, f64)>,
    pub outcomes: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn any_dnf(&self) -> bool {
        self.summary.iter().any(|r| r.dnf > 0)
    }
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let t = if requested == 0 { avail } else { requested };
    t.clamp(1, jobs.max(1))
}

/// Runs `f` on every index in `0..jobs` using up to `threads` scoped workers.
fn par_map<T: Send>(jobs: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..worker_count(threads, jobs) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let v = f(i);
                slots.lock().expect("worker panicked")[i] = Some(v);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|v| v.expect("job not run")).collect()
}

pub fn trace_path(out: &Path, solver: &str, seed: u64) -> PathBuf {
    out.join("traces").join(format!("{solver}_seed{seed}.csv"))
}

/// Runs every configured solver on every seed and writes traces, the summary
/// and plot data under `cfg.out`. Runs that diverge, stall or are refused
/// count as DNF.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let seeds = cfg.seed_list();
    let instances = par_map(seeds.len(), cfg.threads, |i| build_instance(&cfg.problem, seeds[i]));
    let instances = instances.into_iter().collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(&String, &SolverEntry, &Instance)> =
        cfg.solvers.iter().flat_map(|(n, e)| instances.iter().map(move |inst| (n, e, inst))).collect();
    let outcomes = par_map(jobs.len(), cfg.threads, |i| -> Result<RunOutcome> {
        let (name, entry, inst) = jobs[i];
        let clock = StdClock::start();
        let path = trace_path(&cfg.out, name, inst.seed);
        let report = match solve(name, entry, cfg, inst, &clock) {
            Ok(r) => {
                write_trace(&path, &r.trace)?;
                Ok(r)
            }
            Err(BenchError::Core(e)) => {
                write_trace(&path, &[])?;
                Err(e.to_string())
            }
            Err(e) => return Err(e),
        };
        Ok(RunOutcome { solver: name.clone(), seed: inst.seed, report, trace_path: path })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    // join barrier: summary and plots only after every run has finished
    let summary = summarize(&outcomes);
    let report = ExperimentReport {
        out: cfg.out.clone(),
        instances: instances.iter().map(|i| (i.seed, i.norm_dd)).collect(),
        outcomes,
        summary,
    };
    write_summary(cfg, &report)?;
    write_plots(&cfg.out, &report.outcomes)?;
    Ok(report)
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else if v.fract() == 0.0 {
        format!("{v}")
    } else {
        format!("{v:.1}")
    }
}

fn problem_line(cfg: &ExperimentConfig, instances: &[(u64, f64)]) -> String {
    let desc = match &cfg.problem {
        ProblemConfig::LassoEq { n, m, p1, p2, norm_dd, ridge } => {
            format!("lasso_eq n={n} m={m} p1={p1} p2={p2} target_norm_dd={norm_dd:e} ridge={ridge}")
        }
        ProblemConfig::Qp { n, p2 } => format!("qp n={n} p2={p2}"),
        ProblemConfig::Dist { agents, .. } => format!("dist agents={agents}"),
    };
    let norms: Vec<String> = instances.iter().map(|(s, v)| format!("{s}:{v:.4e}")).collect();
    format!("{desc} tol={:e} lifted_norm_dd[{}]", cfg.tol, norms.join(" "))
}

fn write_summary(cfg: &ExperimentConfig, rep: &ExperimentReport) -> Result<()> {
    let mut csv = String::from("solver,runs,dnf,epochs_mean,epochs_min,epochs_max,iterations_mean\n");
    for r in &rep.summary {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.solver,
            r.runs,
            r.dnf,
            fmt_num(r.epochs_mean),
            fmt_num(r.epochs_min),
            fmt_num(r.epochs_max),
            fmt_num(r.iterations_mean)
        );
    }
    write_text(&rep.out.join("summary.csv"), &csv)?;

    let mut runs = String::from("solver,seed,status,iterations,epochs,detail\n");
    for o in &rep.outcomes {
        let (it, ep, detail) = match &o.report {
            Ok(r) => (r.iterations.to_string(), fmt_num(r.epochs), String::new()),
            Err(e) => ("-".into(), "-".into(), e.replace(',', ";")),
        };
        let _ = writeln!(runs, "{},{},{},{it},{ep},{detail}", o.solver, o.seed, o.status());
    }
    write_text(&rep.out.join("runs.csv"), &runs)?;

    let mut txt = format!("{}\n\n", problem_line(cfg, &rep.instances));
    let _ = writeln!(txt, "{:<12} {:>14} {:>14} {:>14} {:>6}", "solver", "epochs_mean", "epochs_min", "epochs_max", "dnf");
    for r in &rep.summary {
        // a DNF row only bounds the count from below
        let mark = if r.dnf > 0 { ">" } else { "" };
        let _ = writeln!(
            txt,
            "{:<12} {:>14} {:>14} {:>14} {:>6}",
            r.solver,
            format!("{mark}{}", fmt_num(r.epochs_mean)),
            format!("{mark}{}", fmt_num(r.epochs_min)),
            format!("{mark}{}", fmt_num(r.epochs_max)),
            format!("{}/{}", r.dnf, r.runs)
        );
    }
    write_text(&rep.out.join("summary.txt"), &txt)
}

/// Two-column `epochs relative_error` files and a gnuplot driver.
fn write_plots(out: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let dir = out.join("plot");
    let mut curves = Vec::new();
    for o in outcomes {
        let Ok(r) = &o.report else { continue };
        let mut text = String::from("# epochs relative_error\n");
        for rec in &r.trace {
            if let Some(e) = rec.relative_error.filter(|&e| e > 0.0 && rec.epochs > 0.0) {
                let _ = writeln!(text, "{} {e:e}", rec.epochs);
            }
        }
        let file = format!("{}_seed{}.dat", o.solver, o.seed);
        write_text(&dir.join(&file), &text)?;
        curves.push((file, format!("{} (seed {})", o.solver, o.seed)));
    }
    let mut gp = String::from(
        "set logscale xy\nset xlabel \"epochs\"\nset ylabel \"relative error\"\nset key outside\nset terminal pngcairo size 900,600\nset output \"relative_error.png\"\n",
    );
    let plots: Vec<String> = curves.iter().map(|(f, t)| format!("\"{f}\" using 1:2 with lines title \"{t}\"")).collect();
    if !plots.is_empty() {
        let _ = writeln!(gp, "plot {}", plots.join(", \\\n     "));
    }
    write_text(&dir.join("plot.gp"), &gp)
}
