//! Gradient estimators for finite sums `f = w * sum_i f_i`.
//!
//! Every estimator works with the scaled components `h_i = m w grad f_i`,
//! whose plain mean is `grad f`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::smooth::SmoothFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Full,
    /// Uniform sampling with replacement.
    Minibatch { batch: usize },
    Saga,
    /// Loopless SVRG; `p = None` means `1/m`.
    Lsvrg { p: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct GradientEstimator {
    kind: EstimatorKind,
    m: usize,
    n: usize,
    scale: f64,
    rng: ChaCha8Rng,
    component_evals: u64,
    // SAGA: m rows of length n, plus their mean
    table: Vec<f64>,
    table_mean: Vec<f64>,
    since_resum: usize,
    // L-SVRG
    anchor: Vec<f64>,
    anchor_grad: Vec<f64>,
    p: f64,
    initialized: bool,
    scratch: Vec<f64>,
    scratch2: Vec<f64>,
}

impl GradientEstimator {
    pub fn new(kind: EstimatorKind, f: &dyn SmoothFunction, seed: u64) -> Result<Self> {
        let m = f.num_components();
        let n = f.dim();
        if m == 0 {
            return Err(Error::Empty("finite sum"));
        }
        let p = match kind {
            EstimatorKind::Minibatch { batch } if batch == 0 => {
                return Err(Error::InvalidParameter { name: "batch", value: 0.0, requirement: "batch >= 1" });
            }
            EstimatorKind::Lsvrg { p: Some(p) } if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidParameter { name: "p", value: p, requirement: "0 < p <= 1" });
            }
            EstimatorKind::Lsvrg { p: Some(p) } => p,
            _ => 1.0 / m as f64,
        };
        Ok(GradientEstimator {
            kind,
            m,
            n,
            scale: m as f64 * f.convention().weight(m),
            rng: ChaCha8Rng::seed_from_u64(seed),
            component_evals: 0,
            table: Vec::new(),
            table_mean: Vec::new(),
            since_resum: 0,
            anchor: Vec::new(),
            anchor_grad: Vec::new(),
            p,
            initialized: matches!(kind, EstimatorKind::Full | EstimatorKind::Minibatch { .. }),
            scratch: vec![0.0; n],
            scratch2: vec![0.0; n],
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn num_components(&self) -> usize {
        self.m
    }

    /// Component-gradient evaluations so far, including initialization passes.
    pub fn component_evals(&self) -> u64 {
        self.component_evals
    }

    /// `component_evals / m`.
    pub fn epochs(&self) -> f64 {
        self.component_evals as f64 / self.m as f64
    }

    /// Refresh probability of L-SVRG (`1/m` unless overridden).
    pub fn refresh_probability(&self) -> f64 {
        self.p
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Fills the SAGA table or the L-SVRG anchor at `x0`; one epoch is charged.
    /// No-op for the full and minibatch estimators.
    pub fn initialize(&mut self, f: &dyn SmoothFunction, x0: &[f64]) -> Result<()> {
        check_dim("estimator initial point", self.n, x0.len())?;
        match self.kind {
            EstimatorKind::Saga => {
                self.table = vec![0.0; self.m * self.n];
                for i in 0..self.m {
                    let row = &mut self.table[i * self.n..(i + 1) * self.n];
                    f.component_gradient_into(i, x0, row);
                    linalg::scale(self.scale, row);
                }
                self.component_evals += self.m as u64;
                self.table_mean = vec![0.0; self.n];
                self.resum_table();
            }
            EstimatorKind::Lsvrg { .. } => {
                self.anchor = x0.to_vec();
                self.anchor_grad = vec![0.0; self.n];
                f.gradient_into(x0, &mut self.anchor_grad);
                self.component_evals += self.m as u64;
            }
            EstimatorKind::Full | EstimatorKind::Minibatch { .. } => {}
        }
        self.initialized = true;
        Ok(())
    }

    fn resum_table(&mut self) {
        self.table_mean.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.m {
            linalg::axpy(1.0, &self.table[i * self.n..(i + 1) * self.n], &mut self.table_mean);
        }
        linalg::scale(1.0 / self.m as f64, &mut self.table_mean);
        self.since_resum = 0;
    }

    /// Stored SAGA entry for component `i` (scaled), if a table exists.
    pub fn table_entry(&self, i: usize) -> Option<&[f64]> {
        (!self.table.is_empty()).then(|| &self.table[i * self.n..(i + 1) * self.n])
    }

    pub fn table_mean(&self) -> Option<&[f64]> {
        (!self.table_mean.is_empty()).then_some(&self.table_mean[..])
    }

    pub fn anchor(&self) -> Option<(&[f64], &[f64])> {
        (!self.anchor.is_empty()).then(|| (&self.anchor[..], &self.anchor_grad[..]))
    }

    fn scaled_component(&self, f: &dyn SmoothFunction, i: usize, x: &[f64], out: &mut [f64]) {
        f.component_gradient_into(i, x, out);
        if self.scale != 1.0 {
            linalg::scale(self.scale, out);
        }
    }

    /// Writes the estimate of `grad f(x)` into `out` and advances the state.
    pub fn estimate(&mut self, f: &dyn SmoothFunction, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("estimator point", self.n, x.len())?;
        check_dim("estimator output", self.n, out.len())?;
        match self.kind {
            EstimatorKind::Full => {
                f.gradient_into(x, out);
                self.component_evals += self.m as u64;
            }
            EstimatorKind::Minibatch { batch } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut h = core::mem::take(&mut self.scratch);
                for _ in 0..batch {
                    let j = self.rng.random_range(0..self.m);
                    self.scaled_component(f, j, x, &mut h);
                    linalg::axpy(1.0, &h, out);
                }
                self.scratch = h;
                linalg::scale(1.0 / batch as f64, out);
                self.component_evals += batch as u64;
            }
            EstimatorKind::Saga => {
                if !self.initialized {
                    return Err(Error::Uninitialized("SAGA gradient table"));
                }
                let j = self.rng.random_range(0..self.m);
                let mut h = core::mem::take(&mut self.scratch);
                self.scaled_component(f, j, x, &mut h);
                let n = self.n;
                let row = &mut self.table[j * n..(j + 1) * n];
                let inv_m = 1.0 / self.m as f64;
                for k in 0..n {
                    out[k] = h[k] - row[k] + self.table_mean[k];
                    self.table_mean[k] += (h[k] - row[k]) * inv_m;
                    row[k] = h[k];
                }
                self.scratch = h;
                self.component_evals += 1;
                self.since_resum += 1;
                if self.since_resum >= self.m {
                    self.resum_table();
                }
            }
            EstimatorKind::Lsvrg { .. } => {
                if !self.initialized {
                    return Err(Error::Uninitialized("L-SVRG anchor"));
                }
                let j = self.rng.random_range(0..self.m);
                let mut h = core::mem::take(&mut self.scratch);
                let mut ha = core::mem::take(&mut self.scratch2);
                self.scaled_component(f, j, x, &mut h);
                self.scaled_component(f, j, &self.anchor, &mut ha);
                for k in 0..self.n {
                    out[k] = h[k] - ha[k] + self.anchor_grad[k];
                }
                self.scratch = h;
                self.scratch2 = ha;
                self.component_evals += 2;
                if self.rng.random::<f64>() < self.p {
                    self.anchor.copy_from_slice(x);
                    f.gradient_into(x, &mut self.anchor_grad);
                    self.component_evals += self.m as u64;
                }
            }
        }
        Ok(())
    }

    /// Estimate for a fixed draw, without touching the state. `draw` has one
    /// index per minibatch slot, or a single index for SAGA and L-SVRG.
    fn estimate_for_draw(&self, f: &dyn SmoothFunction, x: &[f64], draw: &[usize], out: &mut [f64]) {
        let mut h = vec![0.0; self.n];
        match self.kind {
            EstimatorKind::Full => f.gradient_into(x, out),
            EstimatorKind::Minibatch { batch } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for &j in draw {
                    self.scaled_component(f, j, x, &mut h);
                    linalg::axpy(1.0, &h, out);
                }
                linalg::scale(1.0 / batch as f64, out);
            }
            EstimatorKind::Saga => {
                let j = draw[0];
                self.scaled_component(f, j, x, &mut h);
                let row = &self.table[j * self.n..(j + 1) * self.n];
                for k in 0..self.n {
                    out[k] = h[k] - row[k] + self.table_mean[k];
                }
            }
            EstimatorKind::Lsvrg { .. } => {
                let j = draw[0];
                let mut ha = vec![0.0; self.n];
                self.scaled_component(f, j, x, &mut h);
                self.scaled_component(f, j, &self.anchor, &mut ha);
                for k in 0..self.n {
                    out[k] = h[k] - ha[k] + self.anchor_grad[k];
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProbe {
    /// Mean of the estimate over the probed draws.
    pub mean: Vec<f64>,
    /// Mean of `||g - grad f(x)||^2` over the probed draws.
    pub second_moment: f64,
    /// True when every possible draw was enumerated with equal weight.
    pub exhaustive: bool,
    pub draws: usize,
}

/// Probes the estimator at `x` without advancing it. Draws are enumerated
/// exhaustively when there are at most `trials` of them; otherwise `trials`
/// draws are sampled from a copy of the estimator's generator.
pub fn estimator_variance_probe(
    est: &GradientEstimator,
    f: &dyn SmoothFunction,
    x: &[f64],
    trials: usize,
) -> Result<VarianceProbe> {
    check_dim("probe point", est.n, x.len())?;
    if trials == 0 {
        return Err(Error::InvalidParameter { name: "trials", value: 0.0, requirement: "trials >= 1" });
    }
    if !est.initialized {
        return Err(Error::Uninitialized("estimator"));
    }
    let n = est.n;
    let full = f.gradient(x);
    let slots = match est.kind {
        EstimatorKind::Full => 0,
        EstimatorKind::Minibatch { batch } => batch,
        EstimatorKind::Saga | EstimatorKind::Lsvrg { .. } => 1,
    };
    // number of equally likely draws, saturating
    let total = (0..slots).try_fold(1usize, |acc, _| acc.checked_mul(est.m));

    let mut mean = vec![0.0; n];
    let mut second = 0.0;
    let mut g = vec![0.0; n];
    let mut draw = vec![0usize; slots];
    let accumulate = |g: &[f64], mean: &mut [f64], second: &mut f64| {
        linalg::axpy(1.0, g, mean);
        *second += linalg::norm_sq(&linalg::sub(g, &full));
    };

    let (draws, exhaustive) = match total {
        Some(t) if t <= trials => {
            for idx in 0..t {
                let mut r = idx;
                for s in draw.iter_mut() {
                    *s = r % est.m;
                    r /= est.m;
                }
                est.estimate_for_draw(f, x, &draw, &mut g);
                accumulate(&g, &mut mean, &mut second);
            }
            (t, true)
        }
        _ => {
            let mut rng = est.rng.clone();
            for _ in 0..trials {
                for s in draw.iter_mut() {
                    *s = rng.random_range(0..est.m);
                }
                est.estimate_for_draw(f, x, &draw, &mut g);
                accumulate(&g, &mut mean, &mut second);
            }
            (trials, false)
        }
    };
    linalg::scale(1.0 / draws as f64, &mut mean);
    Ok(VarianceProbe { mean, second_moment: second / draws as f64, exhaustive, draws })
}

/// Constants `(c1, c2, c3, c4)` of the variance-reduction inequality
/// `E||g_k - grad F(X_k)||^2 <= 2 c1 D_F(X_k, X*) + c2 sigma_k^2`,
/// `E sigma_{k+1}^2 <= (1 - c3) sigma_k^2 + 2 c4 D_F(X_k, X*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl VrConstants {
    /// SAGA defaults: `c1 = 2 L_max`, `c2 = 2`, `c3 = 1/m`, `c4 = L_max/m`.
    pub fn saga(m: usize, l_max: f64) -> Self {
        let m = m as f64;
        VrConstants { c1: 2.0 * l_max, c2: 2.0, c3: 1.0 / m, c4: l_max / m }
    }

    /// L-SVRG defaults: `c1 = 2 L_max`, `c2 = 2`, `c3 = p`, `c4 = p L_max`.
    pub fn lsvrg(p: f64, l_max: f64) -> Self {
        VrConstants { c1: 2.0 * l_max, c2: 2.0, c3: p, c4: p * l_max }
    }

    /// `kappa = c2 / c3`.
    pub fn kappa(&self) -> f64 {
        self.c2 / self.c3
    }

    /// Upper bound `1 / (2 (c1 + kappa c4))` on the constant stepsize.
    pub fn alpha_bound(&self) -> f64 {
        1.0 / (2.0 * (self.c1 + self.kappa() * self.c4))
    }
}

/// Largest Lipschitz constant among the scaled components `h_i`.
pub fn scaled_component_lipschitz(f: &dyn SmoothFunction) -> f64 {
    let m = f.num_components();
    m as f64 * f.convention().weight(m) * f.max_component_lipschitz()
}
