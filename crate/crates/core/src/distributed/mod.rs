//! Decentralized variant: agents on a graph keep local copies `x_i` of a
//! shared variable and exchange one vector with each neighbor per round.

mod agent;
mod compact;
mod network;
mod topology;

pub use agent::{
    agent_dual_and_correct, agent_dual_matrix, agent_local_half, build_agent_dual_factor, AgentDualFactor,
    AgentProblem, AgentState, RoundMessage, AGENT_DENSE_LIMIT,
};
pub use compact::{compact_form_oracle, compact_problem, consensus_factor, COMPACT_LIMIT};
pub use network::{dist_round, run_dist, DistConfig, DistRecord, DistReport, Network, NetworkProblem, StackedIterate};
pub use topology::{metropolis_mixing, Topology};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::prox::ProxTerm;
    use crate::smooth::Quadratic;
    use crate::solvers::NoClock;
    use alloc::sync::Arc;
    use alloc::vec::Vec;

    fn quad_agent(i: usize, l: usize, rows: usize) -> AgentProblem {
        let h = Matrix::from_fn(l, l, |r, c| if r == c { 1.0 + (i + r) as f64 * 0.3 } else { 0.1 });
        let c: Vec<f64> = (0..l).map(|r| ((i * 3 + r) % 5) as f64 - 2.0).collect();
        let b = Matrix::from_fn(rows, l, |r, c| ((i + 2 * r + 3 * c) % 4) as f64 - 1.5);
        let r = if rows > 0 { ProxTerm::L1 { weight: 0.2 } } else { ProxTerm::Zero };
        AgentProblem::new(Arc::new(Quadratic::new(h, c).unwrap()), r, b).unwrap()
    }

    fn network(t: Topology, l: usize, rows: usize) -> NetworkProblem {
        let agents = (0..t.num_agents()).map(|i| quad_agent(i, l, rows)).collect();
        NetworkProblem::new(t, agents).unwrap()
    }

    #[test]
    fn agents_match_compact_form() {
        let p = network(Topology::path(2).unwrap(), 2, 1);
        let cfg = DistConfig::new(0.2, 0.5);
        let x0 = [0.5, -1.0];
        let oracle = compact_form_oracle(&p, &cfg, Some(&x0), 10).unwrap();
        let mut net = Network::new(p, cfg, Some(&x0)).unwrap();
        assert!(net.stacked().max_abs_diff(&oracle[0]) == 0.0);
        for it in &oracle[1..] {
            dist_round(&mut net).unwrap();
            assert!(net.stacked().max_abs_diff(it) <= 1e-12);
        }
    }

    #[test]
    fn messages_per_round() {
        let p = network(Topology::ring(10).unwrap(), 1, 0);
        let mut net = Network::new(p, DistConfig::new(0.2, 0.5), None).unwrap();
        assert_eq!(dist_round(&mut net).unwrap(), 20);
        assert_eq!(dist_round(&mut net).unwrap(), 20);
        assert_eq!(net.messages_sent(), 40);
    }

    #[test]
    fn single_agent_has_no_consensus_dual() {
        let p = network(Topology::path(1).unwrap(), 2, 2);
        let mut net = Network::new(p, DistConfig::new(0.2, 0.5), None).unwrap();
        for _ in 0..5 {
            assert_eq!(dist_round(&mut net).unwrap(), 0);
        }
        assert!(net.agents()[0].mu.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn ring_reaches_consensus() {
        let p = network(Topology::ring(3).unwrap(), 2, 1);
        let mut net = Network::new(p, DistConfig::new(0.3, 0.5), None).unwrap();
        let rep = run_dist(&mut net, 20_000, 1e-8, None, &NoClock).unwrap();
        assert!(rep.trace.last().unwrap().consensus_violation <= 1e-8, "{:?}", rep.status);
    }

    #[test]
    fn compact_guard() {
        let p = network(Topology::path(2).unwrap(), 1700, 0);
        let err = compact_form_oracle(&p, &DistConfig::new(0.1, 0.5), None, 1).unwrap_err();
        assert!(matches!(err, crate::Error::TooLarge { .. }));
    }
}
