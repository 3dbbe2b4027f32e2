use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Undirected connected graph on agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Edges are stored as `(i, j)` with `i < j`; duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("topology"));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter {
                    name: "edge endpoint",
                    value: i.max(j) as f64,
                    requirement: "endpoints below the agent count",
                });
            }
            if i == j {
                return Err(Error::InvalidParameter { name: "edge", value: i as f64, requirement: "no self loops" });
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let t = Topology { n, edges, neighbors };
        let reached = t.reachable_from_zero();
        if reached < n {
            return Err(Error::Disconnected { reached, total: n });
        }
        Ok(t)
    }

    pub fn path(n: usize) -> Result<Self> {
        let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &e)
    }

    /// Cycle on `n` nodes; for `n < 3` this is the path.
    pub fn ring(n: usize) -> Result<Self> {
        let mut e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n >= 3 {
            e.push((n - 1, 0));
        }
        Self::from_edges(n, &e)
    }

    /// Hub `0` joined to every other node.
    pub fn star(n: usize) -> Result<Self> {
        let e: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &e)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let e: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &e)
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    fn reachable_from_zero(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    }
}

/// Metropolis weights `U_ij = 1 / (1 + max(deg_i, deg_j))` on edges, with
/// the diagonal filling each row to 1.
pub fn metropolis_mixing(t: &Topology) -> Matrix {
    let n = t.num_agents();
    let mut u = Matrix::zeros(n, n);
    for &(i, j) in t.edges() {
        let w = 1.0 / (1.0 + t.degree(i).max(t.degree(j)) as f64);
        u[(i, j)] = w;
        u[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = t.neighbors(i).iter().map(|&j| u[(i, j)]).sum();
        u[(i, i)] = 1.0 - off;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_is_uniform() {
        let u = metropolis_mixing(&Topology::complete(3).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert!((u[(i, j)] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_node_path() {
        let u = metropolis_mixing(&Topology::path(2).unwrap());
        assert_eq!(u, Matrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap());
    }

    #[test]
    fn ring_of_ten() {
        let t = Topology::ring(10).unwrap();
        assert_eq!(t.num_edges(), 10);
        let u = metropolis_mixing(&t);
        assert!(u.is_symmetric(0.0));
        for i in 0..10 {
            let s: f64 = (0..10).map(|j| u[(i, j)]).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let err = Topology::from_edges(4, &[(0, 1), (2, 3)]).unwrap_err();
        assert_eq!(err, Error::Disconnected { reached: 2, total: 4 });
    }

    #[test]
    fn bad_edges() {
        assert!(Topology::from_edges(3, &[(0, 3)]).is_err());
        assert!(Topology::from_edges(3, &[(1, 1)]).is_err());
        let t = Topology::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(t.num_edges(), 1);
    }
}
