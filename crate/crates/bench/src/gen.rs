//! Writes generated instances to plain-text files.

use std::path::{Path, PathBuf};

use balpa_core::generators::{gen_eq_qp, gen_lasso_eq};

use crate::config::ProblemConfig;
use crate::dist::{build_network, load_dataset};
use crate::error::Result;
use crate::io::{write_libsvm, write_matrix, write_topology, write_vector};

/// Writes the instance for `seed` into `dir/seed<seed>/` and returns that
/// directory.
pub fn write_instance(problem: &ProblemConfig, seed: u64, dir: &Path) -> Result<PathBuf> {
    let dir = dir.join(format!("seed{seed}"));
    match *problem {
        ProblemConfig::LassoEq { n, m, p1, p2, norm_dd, .. } => {
            let inst = gen_lasso_eq(n, m, p1, p2, norm_dd, seed)?;
            for (i, (a, rhs)) in inst.a.iter().zip(&inst.a_rhs).enumerate() {
                write_matrix(&dir.join(format!("A_{i}.txt")), a)?;
                write_vector(&dir.join(format!("a_{i}.txt")), rhs)?;
            }
            write_matrix(&dir.join("B.txt"), &inst.b)?;
            write_matrix(&dir.join("D.txt"), &inst.d)?;
            write_vector(&dir.join("d.txt"), &inst.d_rhs)?;
        }
        ProblemConfig::Qp { n, p2 } => {
            let (h, c, d, dv) = gen_eq_qp(n, p2, seed);
            write_matrix(&dir.join("H.txt"), &h)?;
            write_vector(&dir.join("c.txt"), &c)?;
            write_matrix(&dir.join("D.txt"), &d)?;
            write_vector(&dir.join("d.txt"), &dv)?;
        }
        ProblemConfig::Dist { .. } => {
            write_libsvm(&dir.join("data.libsvm"), &load_dataset(problem, seed)?)?;
            let p = build_network(problem, seed)?;
            write_topology(&dir.join("topology.txt"), &p.topology)?;
            for (i, a) in p.agents.iter().enumerate() {
                write_matrix(&dir.join(format!("B_{i}.txt")), &a.b)?;
            }
        }
    }
    Ok(dir)
}
