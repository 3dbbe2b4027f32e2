//! Stochastic gradients and stepsize schedules.

mod estimator;
mod schedule;

pub use estimator::{estimator_variance_probe, scaled_component_lipschitz, EstimatorKind, GradientEstimator, VarianceProbe, VrConstants};
pub use schedule::{schedule_step, ScheduleKind, StepsizeSchedule};
