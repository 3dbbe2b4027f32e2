//! BALPA, the reference primal-dual methods and their driver.

mod diagnostics;
mod metric;
mod run;
mod state;
mod step;
mod stepsize;

pub use diagnostics::{
    bregman_gap, bregman_prox, bregman_smooth, diagnostics, ergodic_average, h_norm_sq, m_norm_sq, merit, rho,
    Diagnostics, ErgodicAverage,
};
pub use metric::{build_dual_metric, build_iterative, DualMetric, MetricBlock, CG_TOL, DENSE_LIMIT};
pub use run::{
    run, Clock, NoClock, Reference, SolveReport, SolverConfig, Status, StopMetric, TracePolicy, TraceRecord,
    DIVERGENCE_THRESHOLD,
};
pub use state::SaddleState;
pub use step::{
    balpa_step, balpa_step_in_place, baseline_step, baseline_step_in_place, dual_update, dual_update_with_residual,
    SolverKind, StepStats, DUAL_RESIDUAL_TOL,
};
pub use stepsize::{check_stepsize, ergodic_regime, Verdict};
