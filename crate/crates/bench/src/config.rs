//! Experiment configuration, read from TOML. See `configs/README.md` for the
//! schema.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use balpa_core::distributed::Topology;
use balpa_core::smooth::SampleLossKind;
use balpa_core::solvers::{SolverKind, StopMetric};
use balpa_core::stochastic::{EstimatorKind, StepsizeSchedule};
use serde::Deserialize;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_epochs: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// `relative_error`, `fixed_point_residual` or `constraint_violation`.
    #[serde(default)]
    pub stop_metric: Option<String>,
    /// Record every `trace_every`-th iteration; log-spaced when absent.
    #[serde(default)]
    pub trace_every: Option<usize>,
    #[serde(default = "default_per_decade")]
    pub trace_per_decade: usize,
    /// Run `(solver, seed)` pairs on this many threads; 0 means all cores.
    #[serde(default)]
    pub threads: usize,
    pub problem: ProblemConfig,
    pub solvers: BTreeMap<String, SolverEntry>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    1_000_000
}
fn default_per_decade() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Generalized Lasso with equality constraints.
    LassoEq {
        n: usize,
        #[serde(default = "ten")]
        m: usize,
        #[serde(default = "twenty")]
        p1: usize,
        #[serde(default = "twenty")]
        p2: usize,
        norm_dd: f64,
        #[serde(default)]
        ridge: f64,
    },
    /// Strongly convex quadratic with equality constraints; solved exactly
    /// for the reference.
    Qp { n: usize, p2: usize },
    /// Regression on agent shards of a dataset.
    Dist {
        /// LIBSVM file; a synthetic binary dataset is generated when absent.
        #[serde(default)]
        dataset: Option<PathBuf>,
        #[serde(default = "default_samples")]
        n_samples: usize,
        #[serde(default = "twenty")]
        n_features: usize,
        #[serde(default = "default_density")]
        density: f64,
        #[serde(default = "ten")]
        agents: usize,
        /// `ring`, `path`, `star`, `complete`, or a topology file.
        #[serde(default = "default_topology")]
        topology: String,
        #[serde(default = "default_loss")]
        loss: String,
        #[serde(default = "default_dist_p1")]
        p1: usize,
    },
}

fn ten() -> usize {
    10
}
fn twenty() -> usize {
    20
}
fn default_samples() -> usize {
    1000
}
fn default_density() -> f64 {
    0.3
}
fn default_topology() -> String {
    "ring".into()
}
fn default_loss() -> String {
    "logistic".into()
}
fn default_dist_p1() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    /// Absolute primal stepsize; overrides `alpha_scale`.
    pub alpha: Option<f64>,
    /// BALPA: `alpha = alpha_scale / L`. Others: `alpha = alpha_scale / (beta ||D^T D|| + L)`.
    pub alpha_scale: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// `full`, `minibatch`, `saga` or `lsvrg`.
    pub estimator: Option<String>,
    pub batch: Option<usize>,
    pub lsvrg_p: Option<f64>,
    /// `constant`, `diminishing`, `horizon` or `strongly_convex`.
    pub schedule: Option<String>,
    /// Schedule constant; `1 + L` when absent.
    pub c: Option<f64>,
    pub mu: Option<f64>,
    pub horizon: Option<usize>,
    /// Run even if the stepsize condition fails.
    #[serde(default)]
    pub unchecked: bool,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_str(&text)?;
        if let ProblemConfig::Dist { dataset: Some(p), .. } = &mut cfg.problem {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
        }
    }

    pub fn is_dist(&self) -> bool {
        matches!(self.problem, ProblemConfig::Dist { .. })
    }

    pub fn stop_metric(&self) -> Option<StopMetric> {
        self.stop_metric.as_deref().and_then(StopMetric::parse)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.solvers.is_empty() {
            return bad("no solvers configured".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if let Some(e) = self.max_epochs {
            if !(e >= 0.0) {
                return bad(format!("max_epochs must be nonnegative, got {e}"));
            }
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return bad("seeds is empty".into());
        }
        if let Some(m) = &self.stop_metric {
            if StopMetric::parse(m).is_none() {
                return bad(format!("unknown stop_metric {m:?}"));
            }
        }
        if self.trace_every == Some(0) || self.trace_per_decade == 0 {
            return bad("trace spacing must be positive".into());
        }
        for (name, entry) in &self.solvers {
            let kind = SolverKind::parse(name).ok_or_else(|| BenchError::Config(format!("unknown solver {name:?}")))?;
            if self.is_dist() && kind != SolverKind::Balpa {
                return bad(format!("solver {name:?} has no distributed form; use balpa"));
            }
            if kind != SolverKind::Balpa && entry.beta.is_none() {
                return bad(format!("solver {name:?} needs beta"));
            }
            entry.estimator_kind()?;
            if let Some(s) = &entry.schedule {
                if !["constant", "diminishing", "horizon", "strongly_convex"].contains(&s.as_str()) {
                    return bad(format!("unknown schedule {s:?}"));
                }
                if s == "strongly_convex" && entry.mu.is_none() {
                    return bad("strongly_convex schedule needs mu".into());
                }
                if s == "horizon" && entry.horizon.is_none() {
                    return bad("horizon schedule needs horizon".into());
                }
            }
        }
        if let ProblemConfig::Dist { loss, topology, agents, .. } = &self.problem {
            loss_kind(loss)?;
            if *agents == 0 {
                return bad("agents must be positive".into());
            }
            if builtin_topology(topology, *agents).is_none() && !Path::new(topology).exists() {
                return bad(format!("topology {topology:?} is neither a known graph nor a file"));
            }
        }
        Ok(())
    }
}

pub fn loss_kind(s: &str) -> Result<SampleLossKind> {
    match s {
        "logistic" => Ok(SampleLossKind::Logistic),
        "linear" | "squared" => Ok(SampleLossKind::Squared),
        _ => Err(BenchError::Config(format!("unknown loss {s:?}"))),
    }
}

/// `None` when `name` is not a built-in graph.
pub fn builtin_topology(name: &str, agents: usize) -> Option<balpa_core::Result<Topology>> {
    Some(match name {
        "ring" => Topology::ring(agents),
        "path" => Topology::path(agents),
        "star" => Topology::star(agents),
        "complete" => Topology::complete(agents),
        _ => return None,
    })
}

impl SolverEntry {
    pub fn estimator_kind(&self) -> Result<Option<EstimatorKind>> {
        Ok(match self.estimator.as_deref() {
            None => None,
            Some("full") => Some(EstimatorKind::Full),
            Some("minibatch") => Some(EstimatorKind::Minibatch { batch: self.batch.unwrap_or(1) }),
            Some("saga") => Some(EstimatorKind::Saga),
            Some("lsvrg") => Some(EstimatorKind::Lsvrg { p: self.lsvrg_p }),
            Some(other) => return Err(BenchError::Config(format!("unknown estimator {other:?}"))),
        })
    }

    /// Stepsize schedule for a smooth part with Lipschitz constant `lip`.
    pub fn schedule(&self, lip: f64) -> Option<StepsizeSchedule> {
        let c = self.c.unwrap_or_else(|| StepsizeSchedule::default_c(lip));
        match self.schedule.as_deref()? {
            "diminishing" => Some(StepsizeSchedule::diminishing(c)),
            "horizon" => Some(StepsizeSchedule::horizon(c, self.horizon.unwrap_or(1))),
            "strongly_convex" => Some(StepsizeSchedule::strongly_convex(c, self.mu.unwrap_or(0.0))),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RACE: &str = r#"
        seeds = [1, 2]
        out = "runs/x"
        tol = 1e-6
        [problem]
        kind = "lasso_eq"
        n = 30
        norm_dd = 1e3
        [solvers.balpa]
        gamma = 1.0
        [solvers.pd3o]
        beta = 1e-3
    "#;

    #[test]
    fn parses_race() {
        let cfg = ExperimentConfig::from_str(RACE).unwrap();
        assert_eq!(cfg.seed_list(), vec![1, 2]);
        assert_eq!(cfg.problem, ProblemConfig::LassoEq { n: 30, m: 10, p1: 20, p2: 20, norm_dd: 1e3, ridge: 0.0 });
        assert_eq!(cfg.solvers.len(), 2);
    }

    #[test]
    fn rejects_unknown_solver() {
        let text = RACE.replace("solvers.pd3o", "solvers.admm");
        let err = ExperimentConfig::from_str(&text).unwrap_err();
        assert!(err.is_config_error() && err.to_string().contains("admm"), "{err}");
    }

    #[test]
    fn baseline_needs_beta() {
        let text = RACE.replace("beta = 1e-3", "alpha = 0.1");
        assert!(ExperimentConfig::from_str(&text).unwrap_err().to_string().contains("needs beta"));
    }

    #[test]
    fn dist_only_balpa() {
        let text = r#"
            [problem]
            kind = "dist"
            agents = 4
            [solvers.condat_vu]
            beta = 0.5
        "#;
        assert!(ExperimentConfig::from_str(text).is_err());
    }
}
