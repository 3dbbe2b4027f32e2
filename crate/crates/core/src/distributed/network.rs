use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::operator::LinearOperator;
use crate::problem::CompositeProblem;
use crate::prox::{Block, ProxTerm};
use crate::smooth::SharedSum;
use crate::solvers::{Clock, Status, DIVERGENCE_THRESHOLD};
use crate::stochastic::{schedule_step, EstimatorKind, GradientEstimator, StepsizeSchedule};

use super::agent::{agent_dual_and_correct, agent_local_half, AgentProblem, AgentState, RoundMessage};
use super::topology::{metropolis_mixing, Topology};

/// Agents on a graph, each holding its own `f_i`, `r_i`, `B_i` over a shared
/// variable of length `l`.
#[derive(Debug, Clone)]
pub struct NetworkProblem {
    pub topology: Topology,
    pub mixing: Matrix,
    pub agents: Vec<AgentProblem>,
}

impl NetworkProblem {
    /// Uses Metropolis weights.
    pub fn new(topology: Topology, agents: Vec<AgentProblem>) -> Result<Self> {
        let mixing = metropolis_mixing(&topology);
        Self::with_mixing(topology, mixing, agents)
    }

    pub fn with_mixing(topology: Topology, mixing: Matrix, agents: Vec<AgentProblem>) -> Result<Self> {
        let n = topology.num_agents();
        check_dim("agent count", n, agents.len())?;
        check_dim("mixing rows", n, mixing.rows())?;
        check_dim("mixing cols", n, mixing.cols())?;
        let l = agents[0].dim();
        for a in &agents {
            check_dim("agent variable", l, a.dim())?;
        }
        Ok(NetworkProblem { topology, mixing, agents })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Length `l` of the shared variable.
    pub fn dim(&self) -> usize {
        self.agents[0].dim()
    }

    /// Offsets of each agent's `y_i` inside the stacked `y`.
    pub fn y_offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for a in &self.agents {
            off.push(off.last().unwrap() + a.local_rows());
        }
        off
    }

    /// `sum_i r_i` as one separable term on the stacked `y`.
    pub fn stacked_regularizer(&self) -> Result<ProxTerm> {
        let off = self.y_offsets();
        let total = *off.last().unwrap();
        if self.agents.iter().all(|a| a.r.is_zero()) {
            return Ok(ProxTerm::Zero);
        }
        let parts = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.local_rows() > 0)
            .map(|(i, a)| (Block::new(off[i], a.local_rows()), a.r.clone()))
            .collect();
        ProxTerm::separable(parts, total)
    }

    /// `min_x sum_i f_i(x) + r_i(B_i x)` on a single machine.
    pub fn centralized(&self) -> Result<CompositeProblem> {
        let l = self.dim();
        let f = Arc::new(SharedSum::new(self.agents.iter().map(|a| a.f.clone()).collect())?);
        let rows: Vec<&Matrix> = self.agents.iter().map(|a| &a.b).collect();
        let b = Matrix::vstack(&rows)?;
        let b = if b.rows() == 0 { LinearOperator::zero(0, l) } else { LinearOperator::dense(b) };
        CompositeProblem::new(f, self.stacked_regularizer()?, b, LinearOperator::zero(0, l), Vec::new())
    }

    /// `sum_i f_i(x_i) + r_i(y_i)` at stacked points.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        let l = self.dim();
        let off = self.y_offsets();
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.objective(&x[i * l..(i + 1) * l], &y[off[i]..off[i + 1]]))
            .sum()
    }
}

/// Parameters of the distributed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DistConfig {
    /// Preconditioner constant and, without a schedule, the stepsize.
    pub alpha: f64,
    /// In `(0, 1)`.
    pub gamma: f64,
    pub schedule: Option<StepsizeSchedule>,
    /// Per-agent gradient estimator; exact gradients when absent.
    pub estimator: Option<EstimatorKind>,
    pub seed: u64,
}

impl DistConfig {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        DistConfig { alpha, gamma, schedule: None, estimator: None, seed: 0 }
    }

    pub fn alpha_bar(&self) -> f64 {
        self.schedule.map_or(self.alpha, |s| s.alpha_bar)
    }

    pub fn step(&self, k: usize) -> Result<f64> {
        match &self.schedule {
            Some(s) => Ok(schedule_step(s, k)?.0),
            None => Ok(self.alpha),
        }
    }
}

/// Stacked copy of all agent iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedIterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl StackedIterate {
    /// Largest componentwise difference over all four blocks.
    pub fn max_abs_diff(&self, other: &StackedIterate) -> f64 {
        let pairs = [(&self.x, &other.x), (&self.y, &other.y), (&self.mu, &other.mu), (&self.nu, &other.nu)];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max)
    }
}

/// Synchronous simulation of all agents.
#[derive(Debug, Clone)]
pub struct Network {
    problem: NetworkProblem,
    config: DistConfig,
    agents: Vec<AgentState>,
    estimators: Vec<Option<GradientEstimator>>,
    round: usize,
    messages_sent: u64,
    exact_evals: u64,
}

impl Network {
    /// Starts every agent at `x0` (zero when absent) with `y_i^0 = B_i x0`.
    pub fn new(problem: NetworkProblem, config: DistConfig, x0: Option<&[f64]>) -> Result<Self> {
        let l = problem.dim();
        let x0 = match x0 {
            Some(x) => {
                check_dim("initial point", l, x.len())?;
                x.to_vec()
            }
            None => vec![0.0; l],
        };
        if let Some(s) = &config.schedule {
            s.validate()?;
        }
        let alpha_bar = config.alpha_bar();
        let mut agents = Vec::with_capacity(problem.num_agents());
        let mut estimators = Vec::with_capacity(problem.num_agents());
        for (i, a) in problem.agents.iter().enumerate() {
            let y0 = a.b.mul_vec(&x0)?;
            agents.push(AgentState::new(i, a, x0.clone(), y0, alpha_bar, config.gamma)?);
            let est = match config.estimator {
                Some(kind) => {
                    let mut e = GradientEstimator::new(kind, a.f.as_ref(), config.seed.wrapping_add(i as u64))?;
                    e.initialize(a.f.as_ref(), &x0)?;
                    Some(e)
                }
                None => None,
            };
            estimators.push(est);
        }
        Ok(Network { problem, config, agents, estimators, round: 0, messages_sent: 0, exact_evals: 0 })
    }

    pub fn problem(&self) -> &NetworkProblem {
        &self.problem
    }

    pub fn config(&self) -> &DistConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn messages_sent(&self) -> u64 {
        self.messages_sent
    }

    /// Mean over agents of component-gradient evaluations divided by `m_i`.
    pub fn epochs(&self) -> f64 {
        let n = self.agents.len() as f64;
        let total: f64 = self
            .estimators
            .iter()
            .map(|e| match e {
                Some(e) => e.epochs(),
                None => self.exact_evals as f64,
            })
            .sum();
        total / n
    }

    pub fn stacked(&self) -> StackedIterate {
        let cat = |f: fn(&AgentState) -> &Vec<f64>| self.agents.iter().flat_map(|a| f(a).iter().copied()).collect();
        StackedIterate { x: cat(|a| &a.x), y: cat(|a| &a.y), mu: cat(|a| &a.mu), nu: cat(|a| &a.nu) }
    }

    /// Average of the local copies.
    pub fn mean_x(&self) -> Vec<f64> {
        let l = self.problem.dim();
        let mut m = vec![0.0; l];
        for a in &self.agents {
            linalg::axpy(1.0, &a.x, &mut m);
        }
        linalg::scale(1.0 / self.agents.len() as f64, &mut m);
        m
    }

    /// `max_i ||x_i - mean||`
    pub fn consensus_violation(&self) -> f64 {
        let m = self.mean_x();
        self.agents.iter().map(|a| linalg::dist(&a.x, &m)).fold(0.0, f64::max)
    }

    pub fn objective(&self) -> f64 {
        let s = self.stacked();
        self.problem.objective(&s.x, &s.y)
    }

    /// `sqrt(sum_i ||B_i x_i - y_i||^2)`
    pub fn coupling_violation(&self) -> f64 {
        let sq: f64 = self
            .agents
            .iter()
            .zip(&self.problem.agents)
            .map(|(s, p)| {
                let mut bx = vec![0.0; p.b.rows()];
                p.b.mul_vec_into(&s.x, &mut bx);
                linalg::norm_sq(&linalg::sub(&bx, &s.y))
            })
            .sum();
        libm::sqrt(sq)
    }
}

/// One synchronous round: all local halves, one message per directed edge,
/// then all dual updates and corrections. Returns the number of messages.
pub fn dist_round(net: &mut Network) -> Result<u64> {
    let alpha_k = net.config.step(net.round)?;
    let alpha = net.config.alpha_bar();
    if !(alpha_k > 0.0 && alpha_k <= alpha * (1.0 + 1e-12)) {
        return Err(Error::StepsizeOutOfRange { alpha_k, alpha_bar: alpha });
    }
    let n = net.agents.len();
    let l = net.problem.dim();
    let mut outbox = Vec::with_capacity(n);
    let mut g = vec![0.0; l];
    for i in 0..n {
        let prob = &net.problem.agents[i];
        match net.estimators[i].as_mut() {
            Some(e) => e.estimate(prob.f.as_ref(), &net.agents[i].x, &mut g)?,
            None => prob.f.gradient_into(&net.agents[i].x, &mut g),
        }
        outbox.push(agent_local_half(&mut net.agents[i], prob, alpha_k, &g)?);
    }
    if net.estimators.iter().any(Option::is_none) {
        net.exact_evals += 1;
    }

    let mut sent = 0;
    let mut inboxes: Vec<Vec<RoundMessage>> = vec![Vec::new(); n];
    for (i, msg) in outbox.iter().enumerate() {
        for &j in net.problem.topology.neighbors(i) {
            inboxes[j].push(msg.clone());
            sent += 1;
        }
    }
    for (i, inbox) in inboxes.iter().enumerate() {
        let weights: Vec<(usize, f64)> =
            net.problem.topology.neighbors(i).iter().map(|&j| (j, net.problem.mixing[(i, j)])).collect();
        let u_ii = net.problem.mixing[(i, i)];
        agent_dual_and_correct(
            &mut net.agents[i],
            &net.problem.agents[i],
            inbox,
            &weights,
            u_ii,
            alpha,
            net.config.gamma,
            alpha_k,
        )?;
    }
    net.round += 1;
    net.messages_sent += sent;
    Ok(sent)
}

/// One row of a distributed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DistRecord {
    pub round: usize,
    pub objective: f64,
    /// `||(D x, B x - y)||` of the compact form, with `D^T D = (I - U)/2`.
    pub constraint_violation: f64,
    /// Euclidean length of the last step in `(x, y, mu, nu)`.
    pub fixed_point_residual: f64,
    /// `||x - 1 x*|| / ||x^0 - 1 x*||` on the stacked local copies.
    pub relative_error: Option<f64>,
    pub wall_time_s: f64,
    pub epochs: f64,
    pub consensus_violation: f64,
    pub messages_sent: u64,
}

#[derive(Debug, Clone)]
pub struct DistReport {
    pub status: Status,
    pub rounds: usize,
    pub trace: Vec<DistRecord>,
    pub final_iterate: StackedIterate,
    pub mean_x: Vec<f64>,
}

/// Runs rounds until the consensus violation and the relative error (or the
/// step length when no reference is given) are both at most `tol`.
pub fn run_dist(
    net: &mut Network,
    max_rounds: usize,
    tol: f64,
    reference: Option<&[f64]>,
    clock: &dyn Clock,
) -> Result<DistReport> {
    let l = net.problem.dim();
    if let Some(r) = reference {
        check_dim("reference solution", l, r.len())?;
    }
    let dist_to_ref = |s: &StackedIterate, r: &[f64]| -> f64 {
        let sq: f64 = s.x.chunks(l).map(|xi| linalg::norm_sq(&linalg::sub(xi, r))).sum();
        libm::sqrt(sq)
    };
    let start = net.stacked();
    let d0 = reference.map(|r| dist_to_ref(&start, r));
    let record = |net: &Network, s: &StackedIterate, fpr: f64| {
        let rel = reference.map(|r| {
            let d = dist_to_ref(s, r);
            match d0 {
                Some(d0) if d0 > 0.0 => d / d0,
                _ => d,
            }
        });
        let cv = net.consensus_violation();
        DistRecord {
            round: net.round,
            objective: net.problem.objective(&s.x, &s.y),
            constraint_violation: libm::sqrt(consensus_form_sq(net, s) + net.coupling_violation() * net.coupling_violation()),
            fixed_point_residual: fpr,
            relative_error: rel,
            wall_time_s: clock.elapsed_s(),
            epochs: net.epochs(),
            consensus_violation: cv,
            messages_sent: net.messages_sent,
        }
    };
    let done = |r: &DistRecord| {
        r.consensus_violation <= tol && r.relative_error.unwrap_or(r.fixed_point_residual) <= tol
    };
    let mut trace = vec![record(net, &start, f64::INFINITY)];
    let mut status = if done(&trace[0]) { Status::Converged } else { Status::MaxIterations };
    let mut prev = start;
    if status != Status::Converged {
        for _ in 0..max_rounds {
            dist_round(net)?;
            let s = net.stacked();
            let fpr = libm::sqrt(
                linalg::norm_sq(&linalg::sub(&s.x, &prev.x))
                    + linalg::norm_sq(&linalg::sub(&s.y, &prev.y))
                    + linalg::norm_sq(&linalg::sub(&s.mu, &prev.mu))
                    + linalg::norm_sq(&linalg::sub(&s.nu, &prev.nu)),
            );
            let rec = record(net, &s, fpr);
            let norm = linalg::norm(&s.x).max(linalg::norm(&s.mu)).max(linalg::norm(&s.nu));
            let finished = done(&rec);
            trace.push(rec);
            prev = s;
            if !(norm <= DIVERGENCE_THRESHOLD) {
                status = Status::Diverged { iter: net.round, norm };
                break;
            }
            if finished {
                status = Status::Converged;
                break;
            }
        }
    }
    Ok(DistReport { status, rounds: net.round, trace, mean_x: net.mean_x(), final_iterate: prev })
}

/// `x^T ((I - U)/2 kron I) x`
fn consensus_form_sq(net: &Network, s: &StackedIterate) -> f64 {
    let l = net.problem.dim();
    let u = &net.problem.mixing;
    let mut total = 0.0;
    for &(i, j) in net.problem.topology.edges() {
        let d = linalg::sub(&s.x[i * l..(i + 1) * l], &s.x[j * l..(j + 1) * l]);
        total += 0.5 * u[(i, j)] * linalg::norm_sq(&d);
    }
    total
}
