//! Agent-level rounds against the stacked centralized iteration.

use balpa_core::distributed::{compact_form_oracle, dist_round, run_dist, DistConfig, Network, NetworkProblem, Topology};
use balpa_core::generators::{gen_binary_dataset, gen_dist_regression};
use balpa_core::lift_problem;
use balpa_core::smooth::SampleLossKind;
use balpa_core::solvers::{run, NoClock, SolverConfig, TracePolicy};

fn network(topo: Topology, p1: usize, seed: u64) -> NetworkProblem {
    let n = topo.num_agents();
    let data = gen_binary_dataset(30 * n, 6, 0.4, seed).unwrap();
    let agents = gen_dist_regression(&data, n, p1, SampleLossKind::Logistic, seed + 1).unwrap();
    NetworkProblem::new(topo, agents).unwrap()
}

fn topologies() -> Vec<(String, Topology)> {
    let mut out = Vec::new();
    for n in [2, 3, 5, 10] {
        out.push((format!("path({n})"), Topology::path(n).unwrap()));
        out.push((format!("star({n})"), Topology::star(n).unwrap()));
        if n >= 3 {
            out.push((format!("ring({n})"), Topology::ring(n).unwrap()));
        }
    }
    out
}

#[test]
fn agents_follow_the_compact_form() {
    for (name, topo) in topologies() {
        for p1 in [0, 2] {
            let p = network(topo.clone(), p1, 3);
            let cfg = DistConfig::new(0.25, 0.5);
            let x0 = [0.3, -0.2, 0.0, 0.1, 0.5, -0.4];
            let oracle = compact_form_oracle(&p, &cfg, Some(&x0), 20).unwrap();
            let mut net = Network::new(p, cfg, Some(&x0)).unwrap();
            assert_eq!(net.stacked().max_abs_diff(&oracle[0]), 0.0);
            for (k, it) in oracle[1..].iter().enumerate() {
                dist_round(&mut net).unwrap();
                let diff = net.stacked().max_abs_diff(it);
                assert!(diff <= 1e-12, "{name} p1={p1} round {}: {diff:e}", k + 1);
            }
        }
    }
}

#[test]
fn messages_are_two_per_edge() {
    for (name, topo) in topologies() {
        let edges = topo.num_edges() as u64;
        let mut net = Network::new(network(topo, 1, 1), DistConfig::new(0.25, 0.5), None).unwrap();
        for r in 1..=5 {
            assert_eq!(dist_round(&mut net).unwrap(), 2 * edges, "{name}");
            assert_eq!(net.messages_sent(), 2 * edges * r, "{name}");
        }
    }
}

#[test]
fn converges_to_the_centralized_solution() {
    for (name, topo) in [("ring(5)", Topology::ring(5).unwrap()), ("star(4)", Topology::star(4).unwrap())] {
        let p = network(topo, 1, 7);
        let lp = lift_problem(&p.centralized().unwrap()).unwrap();
        let cfg = SolverConfig::balpa(1.0 / lp.lipschitz(), 1.0)
            .with_tol(1e-13)
            .with_max_iter(1_000_000)
            .with_trace(TracePolicy::Every(1 << 30));
        let rep = run(&lp, None, &cfg, None, None, &NoClock).unwrap();
        assert!(rep.converged());
        let x_star = rep.final_state.x[..p.dim()].to_vec();

        let mut net = Network::new(p, DistConfig::new(0.25, 0.5), None).unwrap();
        let dr = run_dist(&mut net, 50_000, 1e-6, Some(&x_star), &NoClock).unwrap();
        assert!(dr.status == balpa_core::solvers::Status::Converged, "{name}: {:?}", dr.status);
        let last = dr.trace.last().unwrap();
        assert!(last.consensus_violation <= 1e-6 && last.relative_error.unwrap() <= 1e-6);
        // the error shrinks over every 100-round window once below 1e-2
        let errs: Vec<f64> = dr.trace.iter().map(|r| r.relative_error.unwrap()).collect();
        let start = errs.iter().position(|&e| e <= 1e-2).unwrap();
        for k in (start..errs.len().saturating_sub(100)).step_by(10) {
            assert!(errs[k + 100] < errs[k], "{name}: round {k} {:e} -> {:e}", errs[k], errs[k + 100]);
        }
    }
}
