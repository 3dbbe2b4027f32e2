//! Iteration driver with stopping rules, traces and divergence detection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::{format, string::ToString};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::problem::LiftedProblem;
use crate::stochastic::{schedule_step, EstimatorKind, GradientEstimator, StepsizeSchedule};

use super::diagnostics::ErgodicAverage;
use super::metric::{build_dual_metric, DualMetric};
use super::state::SaddleState;
use super::step::{balpa_step_in_place, baseline_step_in_place, SolverKind, StepStats};
use super::stepsize::{check_stepsize, ergodic_regime, Verdict};

/// Iterates (checked every iteration) or recorded objective values whose
/// magnitude exceeds this are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Source of elapsed wall time; the core crate has no clock of its own.
pub trait Clock {
    fn elapsed_s(&self) -> f64;
}

/// Reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_s(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    /// `||x^k - x*|| / ||x^0 - x*||` on the original variable.
    RelativeError,
    /// Step length in the `M` metric (BALPA) or Euclidean (other methods).
    FixedPointResidual,
    /// `||D X^k - d||`
    ConstraintViolation,
}

impl StopMetric {
    pub fn name(self) -> &'static str {
        match self {
            StopMetric::RelativeError => "relative_error",
            StopMetric::FixedPointResidual => "fixed_point_residual",
            StopMetric::ConstraintViolation => "constraint_violation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [StopMetric::RelativeError, StopMetric::FixedPointResidual, StopMetric::ConstraintViolation]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Which iterations are written to the trace. The first and last iterates are
/// always recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePolicy {
    Every(usize),
    /// About `per_decade` logarithmically spaced iterations per decade.
    LogSpaced { per_decade: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Primal stepsize; for BALPA also the constant in the dual metric unless a
    /// schedule is given.
    pub alpha: f64,
    /// Dual stepsize of the reference methods.
    pub beta: Option<f64>,
    /// BALPA metric parameter.
    pub gamma: Option<f64>,
    /// BALPA stepsize schedule; constant `alpha` when absent.
    pub schedule: Option<StepsizeSchedule>,
    pub max_iter: usize,
    pub max_epochs: Option<f64>,
    pub tol: f64,
    /// Defaults to the relative error when a reference is supplied and to the
    /// fixed-point residual otherwise.
    pub stop_metric: Option<StopMetric>,
    pub trace: TracePolicy,
    /// Record the gap and violation of the ergodic average in the trace.
    pub track_ergodic: bool,
    /// Run even when the stepsize condition fails.
    pub allow_unchecked_stepsize: bool,
    /// Initial primal point `X^0`; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn balpa(alpha: f64, gamma: f64) -> Self {
        SolverConfig {
            kind: SolverKind::Balpa,
            alpha,
            beta: None,
            gamma: Some(gamma),
            schedule: None,
            max_iter: 10_000,
            max_epochs: None,
            tol: 1e-6,
            stop_metric: None,
            trace: TracePolicy::Every(1),
            track_ergodic: false,
            allow_unchecked_stepsize: false,
            x0: None,
        }
    }

    pub fn baseline(kind: SolverKind, alpha: f64, beta: f64) -> Self {
        SolverConfig { kind, beta: Some(beta), gamma: None, ..Self::balpa(alpha, 1.0) }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_schedule(mut self, schedule: StepsizeSchedule) -> Self {
        self.alpha = schedule.alpha_bar;
        self.schedule = Some(schedule);
        self
    }

    pub fn with_stop_metric(mut self, m: StopMetric) -> Self {
        self.stop_metric = Some(m);
        self
    }

    pub fn with_trace(mut self, policy: TracePolicy) -> Self {
        self.trace = policy;
        self
    }

    /// The constant `alpha_bar` bounding every `alpha_k`.
    pub fn alpha_bar(&self) -> f64 {
        self.schedule.map_or(self.alpha, |s| s.alpha_bar)
    }

    /// Checks kind-specific fields.
    pub fn validate(&self) -> Result<()> {
        let a = self.alpha_bar();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", value: a, requirement: "alpha > 0" });
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter { name: "tol", value: self.tol, requirement: "tol >= 0" });
        }
        match self.kind {
            SolverKind::Balpa => match self.gamma {
                Some(g) if g > 0.0 => {}
                Some(g) => return Err(Error::InvalidParameter { name: "gamma", value: g, requirement: "gamma > 0" }),
                None => return Err(Error::InvalidParameter { name: "gamma", value: f64::NAN, requirement: "set for BALPA" }),
            },
            _ => match self.beta {
                Some(b) if b > 0.0 => {}
                Some(b) => return Err(Error::InvalidParameter { name: "beta", value: b, requirement: "beta > 0" }),
                None => {
                    return Err(Error::InvalidParameter { name: "beta", value: f64::NAN, requirement: "set for this solver" })
                }
            },
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// Known solution used for relative errors and gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// Lifted optimum `X* = (x*, B x*)`.
    pub x_star: Vec<f64>,
    pub lambda_star: Option<Vec<f64>>,
    pub phi_star: f64,
}

impl Reference {
    /// From an optimal `x*` of the original problem.
    pub fn from_primal(lp: &LiftedProblem, x: &[f64]) -> Result<Self> {
        check_dim("reference x*", lp.n(), x.len())?;
        let x_star = lp.lift_point(x);
        let phi_star = lp.objective(&x_star);
        Ok(Reference { x_star, lambda_star: None, phi_star })
    }

    pub fn with_dual(mut self, lambda: Vec<f64>) -> Self {
        self.lambda_star = Some(lambda);
        self
    }

    pub fn x_block(&self, n: usize) -> &[f64] {
        &self.x_star[..n]
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// `Phi(X^k) = f(x) + r(y)`
    pub objective: f64,
    /// `||D X^k - d||` in the lifted space.
    pub constraint_violation: f64,
    /// Step length `||V^{k} - W^{k-1}||`, infinite before the first step.
    pub fixed_point_residual: f64,
    pub relative_error: Option<f64>,
    /// `|Phi(Xbar_K) - Phi*|`
    pub ergodic_gap: Option<f64>,
    /// `||D Xbar_K - d||`
    pub ergodic_violation: Option<f64>,
    pub wall_time_s: f64,
    /// Component-gradient evaluations divided by the number of components.
    pub epochs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    MaxIterations,
    MaxEpochs,
    Diverged { iter: usize, norm: f64 },
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::MaxEpochs => "max_epochs",
            Status::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub status: Status,
    pub iterations: usize,
    pub epochs: f64,
    pub wall_time_s: f64,
    pub stop_metric: StopMetric,
    pub final_state: SaddleState,
    pub final_record: TraceRecord,
    pub trace: Vec<TraceRecord>,
    pub verdict: Verdict,
    /// `alpha_bar L < 1`: the ergodic gap bound applies.
    pub ergodic_regime: bool,
    /// Largest dual-solve residual relative to `1 + ||D Xbar - d||`.
    pub max_dual_residual: f64,
    pub ergodic: Option<ErgodicAverage>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Flat `(key, value)` pairs describing the run.
    pub fn summary_pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:e}"));
        let mut out = vec![
            ("solver", self.solver.name().to_string()),
            ("status", self.status.name().to_string()),
            ("iterations", self.iterations.to_string()),
            ("epochs", format!("{}", self.epochs)),
            ("wall_time_s", format!("{:.6}", self.wall_time_s)),
            ("stop_metric", self.stop_metric.name().to_string()),
            ("objective", format!("{:e}", self.final_record.objective)),
            ("constraint_violation", format!("{:e}", self.final_record.constraint_violation)),
            ("fixed_point_residual", format!("{:e}", self.final_record.fixed_point_residual)),
            ("relative_error", opt(self.final_record.relative_error)),
            ("ergodic_gap", opt(self.final_record.ergodic_gap)),
            ("stepsize_condition", if self.verdict.satisfied { "satisfied" } else { "violated" }.to_string()),
            ("stepsize_margin", format!("{:e}", self.verdict.margin)),
            ("stepsize_binding", self.verdict.binding.to_string()),
            ("ergodic_regime", self.ergodic_regime.to_string()),
            ("max_dual_residual", format!("{:e}", self.max_dual_residual)),
        ];
        if let Status::Diverged { iter, norm } = self.status {
            out.push(("diverged_at", iter.to_string()));
            out.push(("diverged_norm", format!("{norm:e}")));
        }
        out
    }
}

struct TraceSchedule {
    policy: TracePolicy,
    step: u32,
    next: usize,
}

impl TraceSchedule {
    fn new(policy: TracePolicy) -> Self {
        TraceSchedule { policy, step: 0, next: 1 }
    }

    fn wants(&mut self, k: usize) -> bool {
        match self.policy {
            TracePolicy::Every(s) => k % s.max(1) == 0,
            TracePolicy::LogSpaced { per_decade } => {
                if k < self.next {
                    return false;
                }
                let per = per_decade.max(1) as f64;
                while self.next <= k {
                    self.step += 1;
                    let t = libm::pow(10.0, self.step as f64 / per);
                    let r = libm::round(t);
                    let t = if (t - r).abs() < 1e-9 * r { r } else { libm::ceil(t) };
                    self.next = (t as usize).max(self.next + 1);
                }
                true
            }
        }
    }
}

struct Ctx<'a> {
    lp: &'a LiftedProblem,
    reference: Option<&'a Reference>,
    x0_dist: f64,
    track_ergodic: bool,
}

impl Ctx<'_> {
    fn relative_error(&self, x: &[f64]) -> Option<f64> {
        self.reference.map(|r| {
            let d = linalg::dist(&x[..self.lp.n()], r.x_block(self.lp.n()));
            if self.x0_dist > 0.0 {
                d / self.x0_dist
            } else {
                d
            }
        })
    }

    fn record(&self, state: &SaddleState, fpr: f64, erg: Option<&ErgodicAverage>, t: f64, epochs: f64) -> TraceRecord {
        let (mut ergodic_gap, mut ergodic_violation) = (None, None);
        if let (true, Some(avg), Some(r)) = (self.track_ergodic, erg, self.reference) {
            if avg.count() > 0 {
                ergodic_gap = Some((self.lp.objective(avg.xbar()) - r.phi_star).abs());
                ergodic_violation = Some(self.lp.constraint_violation(avg.xbar()));
            }
        }
        TraceRecord {
            iter: state.iter,
            objective: self.lp.objective(&state.x),
            constraint_violation: self.lp.constraint_violation(&state.x),
            fixed_point_residual: fpr,
            relative_error: self.relative_error(&state.x),
            ergodic_gap,
            ergodic_violation,
            wall_time_s: t,
            epochs,
        }
    }
}

/// Runs `config` on `lp` from `Lambda^0 = 0`.
///
/// BALPA uses `metric` when given (it must have been built with an
/// `alpha_bar` at least the configured one) and otherwise builds
/// `(1/gamma) I + alpha_bar D D^T`. Its gradients come from `estimator`, or
/// exact gradients when none is given. The reference methods always use exact
/// gradients.
pub fn run(
    lp: &LiftedProblem,
    metric: Option<&DualMetric>,
    config: &SolverConfig,
    estimator: Option<&mut GradientEstimator>,
    reference: Option<&Reference>,
    clock: &dyn Clock,
) -> Result<SolveReport> {
    config.validate()?;
    let stop_metric = config
        .stop_metric
        .unwrap_or(if reference.is_some() { StopMetric::RelativeError } else { StopMetric::FixedPointResidual });
    if stop_metric == StopMetric::RelativeError && reference.is_none() {
        return Err(Error::InvalidParameter {
            name: "stop_metric",
            value: f64::NAN,
            requirement: "relative_error needs a reference solution",
        });
    }
    if let Some(r) = reference {
        check_dim("reference X*", lp.primal_dim(), r.x_star.len())?;
    }

    let lip = lp.lipschitz();
    let alpha_bar = config.alpha_bar();
    let norm_dd = if config.kind == SolverKind::Balpa { 0.0 } else { lp.operator().op_norm_sq(1e-10, 20_000).value };
    let verdict = check_stepsize(config.kind, alpha_bar, config.beta, config.gamma, lip, norm_dd);
    if !verdict.satisfied && !config.allow_unchecked_stepsize {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha_bar, requirement: verdict.binding });
    }

    let owned_metric;
    let metric = match (config.kind, metric) {
        (SolverKind::Balpa, Some(m)) => {
            if m.alpha_bar() < alpha_bar * (1.0 - 1e-12) {
                return Err(Error::StepsizeOutOfRange { alpha_k: alpha_bar, alpha_bar: m.alpha_bar() });
            }
            Some(m)
        }
        (SolverKind::Balpa, None) => {
            owned_metric = build_dual_metric(lp.operator(), alpha_bar, config.gamma.unwrap_or(1.0))?;
            Some(&owned_metric)
        }
        _ => None,
    };

    let x0 = match &config.x0 {
        Some(x) => {
            check_dim("initial point", lp.primal_dim(), x.len())?;
            x.clone()
        }
        None => vec![0.0; lp.primal_dim()],
    };
    let mut state = SaddleState::new(x0, lp.dual_dim());

    let f = lp.smooth().clone();
    let mut owned_est;
    let est: Option<&mut GradientEstimator> = if config.kind == SolverKind::Balpa {
        match estimator {
            Some(e) => Some(e),
            None => {
                owned_est = GradientEstimator::new(EstimatorKind::Full, f.as_ref(), 0)?;
                Some(&mut owned_est)
            }
        }
    } else {
        None
    };
    let mut est = est;
    let m_comp = f.num_components() as f64;
    let mut baseline_evals: u64 = 0;
    if let Some(e) = est.as_deref_mut() {
        if !e.is_initialized() {
            e.initialize(f.as_ref(), &state.x[..lp.n()])?;
        }
    }
    let epochs_now = |est: &Option<&mut GradientEstimator>, baseline_evals: u64| match est {
        Some(e) => e.epochs(),
        None => baseline_evals as f64 / m_comp,
    };

    let ctx = Ctx {
        lp,
        reference,
        x0_dist: reference.map_or(0.0, |r| linalg::dist(&state.x[..lp.n()], r.x_block(lp.n()))),
        track_ergodic: config.track_ergodic,
    };
    let mut ergodic = config.track_ergodic.then(|| ErgodicAverage::new(lp.primal_dim(), lp.dual_dim()));
    let mut schedule = TraceSchedule::new(config.trace);
    let mut trace = Vec::new();
    let mut max_dual_residual: f64 = 0.0;

    let stop_value = |rec_state: &SaddleState, fpr: f64, viol: Option<f64>| -> f64 {
        match stop_metric {
            StopMetric::RelativeError => ctx.relative_error(&rec_state.x).unwrap_or(f64::INFINITY),
            StopMetric::FixedPointResidual => fpr,
            StopMetric::ConstraintViolation => viol.unwrap_or_else(|| lp.constraint_violation(&rec_state.x)),
        }
    };

    let first = ctx.record(&state, f64::INFINITY, None, clock.elapsed_s(), epochs_now(&est, baseline_evals));
    let mut last = first.clone();
    trace.push(first);
    let mut status = Status::MaxIterations;
    if stop_value(&state, f64::INFINITY, Some(last.constraint_violation)) <= config.tol {
        status = Status::Converged;
    } else {
        let mut g = vec![0.0; lp.primal_dim()];
        for k in 0..config.max_iter {
            let (alpha_k, stats): (f64, StepStats) = match config.kind {
                SolverKind::Balpa => {
                    let alpha_k = match &config.schedule {
                        Some(s) => schedule_step(s, k)?.0,
                        None => config.alpha,
                    };
                    let e = est.as_deref_mut().expect("BALPA always has an estimator");
                    let n = lp.n();
                    e.estimate(f.as_ref(), &state.x[..n], &mut g[..n])?;
                    let stats = balpa_step_in_place(&mut state, lp, metric.expect("BALPA metric"), alpha_k, &g)?;
                    (alpha_k, stats)
                }
                kind => {
                    let stats = baseline_step_in_place(kind, &mut state, lp, config.alpha, config.beta.unwrap_or(0.0))?;
                    baseline_evals += stats.gradient_evals as u64 * f.num_components() as u64;
                    (config.alpha, stats)
                }
            };
            max_dual_residual =
                max_dual_residual.max(stats.dual_residual / (1.0 + stats.xbar_violation));
            let fpr = fixed_point_residual(config.kind, &stats, alpha_k, lip);
            if let Some(avg) = ergodic.as_mut() {
                avg.push(&state);
            }
            let norm = linalg::norm(&state.x).max(linalg::norm(&state.lambda));
            let epochs = epochs_now(&est, baseline_evals);
            if !(norm <= DIVERGENCE_THRESHOLD) {
                status = Status::Diverged { iter: state.iter, norm };
                last = ctx.record(&state, fpr, ergodic.as_ref(), clock.elapsed_s(), epochs);
                trace.push(last.clone());
                break;
            }
            let done = stop_value(&state, fpr, None) <= config.tol;
            let out_of_epochs = config.max_epochs.is_some_and(|m| epochs >= m);
            let final_iter = done || out_of_epochs || k + 1 == config.max_iter;
            if schedule.wants(state.iter) || final_iter {
                last = ctx.record(&state, fpr, ergodic.as_ref(), clock.elapsed_s(), epochs);
                trace.push(last.clone());
                if !(last.objective.abs() <= DIVERGENCE_THRESHOLD) {
                    status = Status::Diverged { iter: state.iter, norm: last.objective.abs() };
                    break;
                }
            }
            if done {
                status = Status::Converged;
                break;
            }
            if out_of_epochs {
                status = Status::MaxEpochs;
                break;
            }
        }
    }

    Ok(SolveReport {
        solver: config.kind,
        status,
        iterations: state.iter,
        epochs: last.epochs,
        wall_time_s: last.wall_time_s,
        stop_metric,
        final_state: state,
        final_record: last,
        trace,
        verdict,
        ergodic_regime: ergodic_regime(alpha_bar, lip),
        max_dual_residual,
        ergodic,
    })
}

fn fixed_point_residual(kind: SolverKind, s: &StepStats, alpha: f64, lip: f64) -> f64 {
    let coef = 1.0 / alpha - lip / 2.0;
    let sq = if kind == SolverKind::Balpa && coef > 0.0 {
        coef * s.primal_move_sq + s.dual_move_q_sq - alpha * s.dual_move_dt_sq
    } else {
        s.primal_move_sq + s.dual_move_sq
    };
    libm::sqrt(sq.max(0.0))
}
