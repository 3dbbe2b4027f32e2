//! Decentralized runs: agents on a graph, compared against the centralized
//! solution of the stacked problem.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use balpa_core::distributed::{run_dist, DistConfig, DistReport, Network, NetworkProblem, Topology};
use balpa_core::generators::{gen_binary_dataset, gen_dist_regression, Dataset};
use balpa_core::lift_problem;
use balpa_core::linalg;

use crate::config::{builtin_topology, loss_kind, ExperimentConfig, ProblemConfig, SolverEntry};
use crate::error::{BenchError, Result};
use crate::experiment::{reference_solution, StdClock};
use crate::io::{parse_libsvm, read_topology, write_text};
use crate::trace::write_dist_trace;

pub fn load_dataset(problem: &ProblemConfig, seed: u64) -> Result<Dataset> {
    match problem {
        ProblemConfig::Dist { dataset: Some(p), .. } => parse_libsvm(p),
        ProblemConfig::Dist { n_samples, n_features, density, .. } => {
            Ok(gen_binary_dataset(*n_samples, *n_features, *density, seed)?)
        }
        _ => Err(BenchError::Config("not a distributed problem".into())),
    }
}

pub fn load_topology(name: &str, agents: usize) -> Result<Topology> {
    match builtin_topology(name, agents) {
        Some(t) => Ok(t?),
        None => {
            let t = read_topology(Path::new(name))?;
            if t.num_agents() != agents {
                return Err(BenchError::Config(format!(
                    "topology {name:?} has {} nodes but {agents} agents are configured",
                    t.num_agents()
                )));
            }
            Ok(t)
        }
    }
}

pub fn build_network(problem: &ProblemConfig, seed: u64) -> Result<NetworkProblem> {
    let ProblemConfig::Dist { agents, topology, loss, p1, .. } = problem else {
        return Err(BenchError::Config("not a distributed problem".into()));
    };
    let data = load_dataset(problem, seed)?;
    let topo = load_topology(topology, *agents)?;
    let probs = gen_dist_regression(&data, *agents, *p1, loss_kind(loss)?, seed)?;
    Ok(NetworkProblem::new(topo, probs)?)
}

/// Minimizer of the stacked objective, from a high-accuracy centralized run.
pub fn centralized_solution(p: &NetworkProblem) -> Result<Vec<f64>> {
    let lp = lift_problem(&p.centralized()?)?;
    let r = reference_solution(&lp)?;
    Ok(r.x_block(lp.n()).to_vec())
}

pub fn dist_config(entry: &SolverEntry, p: &NetworkProblem, seed: u64) -> Result<DistConfig> {
    let lip = p.agents.iter().map(|a| a.f.lipschitz()).fold(0.0, f64::max);
    let mut c = DistConfig::new(entry.alpha.unwrap_or(entry.alpha_scale.unwrap_or(1.0) / lip), entry.gamma.unwrap_or(0.5));
    c.schedule = entry.schedule(lip);
    c.estimator = entry.estimator_kind()?;
    c.seed = seed;
    Ok(c)
}

#[derive(Debug)]
pub struct DistOutcome {
    pub seed: u64,
    pub report: DistReport,
    /// `||mean_i x_i - x*||`
    pub distance: f64,
    pub trace_path: PathBuf,
}

/// Runs the agent-based method for every seed and writes one trace per seed
/// plus `summary.csv`.
pub fn run_dist_experiment(cfg: &ExperimentConfig) -> Result<Vec<DistOutcome>> {
    cfg.validate()?;
    let entry = cfg
        .solvers
        .get("balpa")
        .ok_or_else(|| BenchError::Config("distributed runs need a [solvers.balpa] section".into()))?;
    let mut out = Vec::new();
    for seed in cfg.seed_list() {
        let p = build_network(&cfg.problem, seed)?;
        let x_star = centralized_solution(&p)?;
        let dc = dist_config(entry, &p, seed)?;
        let mut net = Network::new(p, dc, None)?;
        let clock = StdClock::start();
        let report = run_dist(&mut net, cfg.max_iter, cfg.tol, Some(&x_star), &clock)?;
        let path = cfg.out.join("traces").join(format!("balpa_dist_seed{seed}.csv"));
        write_dist_trace(&path, &report.trace)?;
        let distance = linalg::norm(&linalg::sub(&report.mean_x, &x_star));
        out.push(DistOutcome { seed, report, distance, trace_path: path });
    }
    let mut csv = String::from("seed,status,rounds,epochs,consensus_violation,distance,messages_sent\n");
    for o in &out {
        let last = o.report.trace.last().expect("trace has the initial record");
        let _ = writeln!(
            csv,
            "{},{},{},{},{:e},{:e},{}",
            o.seed,
            o.report.status.name(),
            o.report.rounds,
            last.epochs,
            last.consensus_violation,
            o.distance,
            last.messages_sent
        );
    }
    write_text(&cfg.out.join("summary.csv"), &csv)?;
    Ok(out)
}
