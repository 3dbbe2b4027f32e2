//! Proximal maps `prox_r^alpha(y) = argmin_v r(v) + ||v - y||^2 / (2 alpha)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Contiguous index range `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn new(start: usize, len: usize) -> Self {
        Block { start, len }
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProxTerm {
    Zero,
    /// `w ||v||_1`
    L1 { weight: f64 },
    /// `w ||v||_2` (unsquared)
    L2Norm { weight: f64 },
    /// `(w/2) ||v||_2^2`
    SquaredL2 { weight: f64 },
    /// Sum of terms on disjoint blocks covering the whole vector.
    Separable(Vec<(Block, ProxTerm)>),
    /// `v -> inner(scale * v + shift)` with `scale != 0`.
    ScaledTranslated { inner: Box<ProxTerm>, scale: f64, shift: Vec<f64> },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "alpha", value: alpha, requirement: "alpha > 0" })
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "weight", value: w, requirement: "weight >= 0" })
    }
}

/// Soft-thresholding: `sign(y_i) max(|y_i| - alpha w, 0)`.
pub fn prox_l1(y: &[f64], alpha: f64, w: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_weight(w)?;
    let mut out = y.to_vec();
    soft_threshold(&mut out, alpha * w);
    Ok(out)
}

fn soft_threshold(v: &mut [f64], t: f64) {
    for vi in v.iter_mut() {
        let a = vi.abs() - t;
        *vi = if a > 0.0 { libm::copysign(a, *vi) } else { 0.0 };
    }
}

/// Block soft-thresholding: zero when `||y|| <= alpha w`, otherwise
/// `(1 - alpha w / ||y||) y`.
pub fn prox_l2norm(y: &[f64], alpha: f64, w: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_weight(w)?;
    let mut out = y.to_vec();
    block_shrink(&mut out, alpha * w);
    Ok(out)
}

fn block_shrink(v: &mut [f64], t: f64) {
    if t == 0.0 {
        return;
    }
    let nv = linalg::norm(v);
    if nv <= t {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        linalg::scale(1.0 - t / nv, v);
    }
}

/// Applies each block's prox independently. Blocks must partition `y`.
pub fn prox_separable(entries: &[(Block, ProxTerm)], y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_partition(entries, y.len())?;
    let mut out = y.to_vec();
    for (b, term) in entries {
        term.validate(b.len)?;
        term.prox_in_place(&mut out[b.range()], alpha);
    }
    Ok(out)
}

fn check_partition(entries: &[(Block, ProxTerm)], dim: usize) -> Result<()> {
    let mut blocks: Vec<Block> = entries.iter().map(|e| e.0).collect();
    blocks.sort_by_key(|b| b.start);
    let mut next = 0;
    for b in &blocks {
        if b.start < next {
            return Err(Error::InvalidBlocks(format!("block at {} overlaps previous block ending at {next}", b.start)));
        }
        if b.start > next {
            return Err(Error::InvalidBlocks(format!("indices {next}..{} are not covered", b.start)));
        }
        next = b.start + b.len;
    }
    if next != dim {
        return Err(Error::InvalidBlocks(format!("blocks cover {next} of {dim} entries")));
    }
    Ok(())
}

impl ProxTerm {
    /// Block-separable term; checks that the blocks partition `0..dim`.
    pub fn separable(entries: Vec<(Block, ProxTerm)>, dim: usize) -> Result<Self> {
        check_partition(&entries, dim)?;
        for (b, t) in &entries {
            t.validate(b.len)?;
        }
        Ok(ProxTerm::Separable(entries))
    }

    /// Checks weights, blocks and shift lengths against a vector of length `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ProxTerm::Zero => Ok(()),
            ProxTerm::L1 { weight } | ProxTerm::L2Norm { weight } | ProxTerm::SquaredL2 { weight } => {
                check_weight(*weight)
            }
            ProxTerm::Separable(entries) => {
                check_partition(entries, dim)?;
                entries.iter().try_for_each(|(b, t)| t.validate(b.len))
            }
            ProxTerm::ScaledTranslated { inner, scale, shift } => {
                if *scale == 0.0 || !scale.is_finite() {
                    return Err(Error::InvalidParameter { name: "scale", value: *scale, requirement: "nonzero" });
                }
                check_dim("scaled/translated prox shift", dim, shift.len())?;
                inner.validate(dim)
            }
        }
    }

    pub fn prox(&self, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        self.validate(y.len())?;
        let mut out = y.to_vec();
        self.prox_in_place(&mut out, alpha);
        Ok(out)
    }

    /// Unchecked in-place prox; call [`ProxTerm::validate`] once beforehand.
    pub fn prox_in_place(&self, v: &mut [f64], alpha: f64) {
        match self {
            ProxTerm::Zero => {}
            ProxTerm::L1 { weight } => soft_threshold(v, alpha * weight),
            ProxTerm::L2Norm { weight } => block_shrink(v, alpha * weight),
            ProxTerm::SquaredL2 { weight } => linalg::scale(1.0 / (1.0 + alpha * weight), v),
            ProxTerm::Separable(entries) => {
                for (b, t) in entries {
                    t.prox_in_place(&mut v[b.range()], alpha);
                }
            }
            ProxTerm::ScaledTranslated { inner, scale, shift } => {
                // prox of inner(a v + b) at y: (prox_{a^2 alpha inner}(a y + b) - b) / a
                for (vi, bi) in v.iter_mut().zip(shift) {
                    *vi = scale * *vi + bi;
                }
                inner.prox_in_place(v, scale * scale * alpha);
                for (vi, bi) in v.iter_mut().zip(shift) {
                    *vi = (*vi - bi) / scale;
                }
            }
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            ProxTerm::Zero => 0.0,
            ProxTerm::L1 { weight } => weight * v.iter().map(|x| x.abs()).sum::<f64>(),
            ProxTerm::L2Norm { weight } => weight * linalg::norm(v),
            ProxTerm::SquaredL2 { weight } => 0.5 * weight * linalg::norm_sq(v),
            ProxTerm::Separable(entries) => entries.iter().map(|(b, t)| t.value(&v[b.range()])).sum(),
            ProxTerm::ScaledTranslated { inner, scale, shift } => {
                let u: Vec<f64> = v.iter().zip(shift).map(|(vi, bi)| scale * vi + bi).collect();
                inner.value(&u)
            }
        }
    }

    /// True when the term is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            ProxTerm::Zero => true,
            ProxTerm::L1 { weight } | ProxTerm::L2Norm { weight } | ProxTerm::SquaredL2 { weight } => *weight == 0.0,
            ProxTerm::Separable(entries) => entries.iter().all(|(_, t)| t.is_zero()),
            ProxTerm::ScaledTranslated { inner, .. } => inner.is_zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(&[2.5, -0.3], 1.0, 1.0).unwrap(), vec![1.5, 0.0]);
        assert_eq!(prox_l1(&[0.0, 0.0], 0.7, 2.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_l1(&[1.25, -3.0], 0.7, 0.0).unwrap(), vec![1.25, -3.0]);
        assert!(prox_l1(&[1.0], 0.0, 1.0).is_err());
        assert!(prox_l1(&[1.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn l2_examples() {
        let p = prox_l2norm(&[3.0, 4.0], 1.0, 1.0).unwrap();
        assert!((p[0] - 2.4).abs() < 1e-15 && (p[1] - 3.2).abs() < 1e-15);
        assert_eq!(prox_l2norm(&[3.0, 4.0], 1.0, 5.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_l2norm(&[0.0, 0.0], 1.0, 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_l2norm(&[3.0, 4.0], 2.0, 0.0).unwrap(), vec![3.0, 4.0]);
        assert!(prox_l2norm(&[1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn separable_lifted_shape() {
        let entries = vec![(Block::new(0, 2), ProxTerm::Zero), (Block::new(2, 2), ProxTerm::L1 { weight: 1.0 })];
        let out = prox_separable(&entries, &[5.0, -5.0, 2.5, -0.3], 1.0).unwrap();
        assert_eq!(out, vec![5.0, -5.0, 1.5, 0.0]);
        let single = vec![(Block::new(0, 2), ProxTerm::L1 { weight: 1.0 })];
        assert_eq!(prox_separable(&single, &[2.5, -0.3], 1.0).unwrap(), prox_l1(&[2.5, -0.3], 1.0, 1.0).unwrap());
    }

    #[test]
    fn separable_rejects_bad_partitions() {
        let overlap = vec![(Block::new(0, 2), ProxTerm::Zero), (Block::new(1, 2), ProxTerm::Zero)];
        assert!(matches!(prox_separable(&overlap, &[0.0; 3], 1.0), Err(Error::InvalidBlocks(_))));
        let gap = vec![(Block::new(0, 1), ProxTerm::Zero), (Block::new(2, 1), ProxTerm::Zero)];
        assert!(matches!(prox_separable(&gap, &[0.0; 3], 1.0), Err(Error::InvalidBlocks(_))));
        let short = vec![(Block::new(0, 2), ProxTerm::Zero)];
        assert!(matches!(prox_separable(&short, &[0.0; 3], 1.0), Err(Error::InvalidBlocks(_))));
    }

    #[test]
    fn scaled_translated_l1() {
        // r(v) = |2v - 1|; prox at y = 3 with alpha = 0.25:
        // argmin |2v-1| + 2 (v-3)^2  -> v = 3 - 0.5 = 2.5
        let t = ProxTerm::ScaledTranslated { inner: Box::new(ProxTerm::L1 { weight: 1.0 }), scale: 2.0, shift: vec![-1.0] };
        let p = t.prox(&[3.0], 0.25).unwrap();
        assert!((p[0] - 2.5).abs() < 1e-15);
        assert!((t.value(&[2.5]) - 4.0).abs() < 1e-15);
    }
}
