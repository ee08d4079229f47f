//! Graph-of-convex-sets relaxation and rounding against Dijkstra.

mod common;

use pushgcs::core::gcs::{build_relaxation, round_paths, solve_restriction};
use pushgcs::core::SolveSettings;
use pushgcs::ClarabelSolver;

use common::*;

#[test]
fn shortest_paths_match_dijkstra() {
    let mut rng = rng(21);
    for case in 0..100 {
        let (graph, costs, edges) = cost_digraph(&mut rng);
        let n = costs.len();
        let (best, optimal_paths) = dijkstra(n, &costs, &edges, 0, n - 1).expect("chain makes the target reachable");
        let relaxation = build_relaxation(&graph).unwrap();
        let sol = relaxation.solve(&ClarabelSolver, &SolveSettings::default()).unwrap();
        assert!((sol.cost - best).abs() <= 1e-6, "case {case}: {} vs {best}", sol.cost);
        for f in &sol.flows {
            assert!(f.min((f - 1.0).abs()) <= 1e-5, "case {case}: fractional flow {f}");
        }
        for v in 1..n - 1 {
            let inflow: f64 = graph.in_edges(v).map(|e| sol.flows[e]).sum();
            let outflow: f64 = graph.out_edges(v).map(|e| sol.flows[e]).sum();
            assert!((inflow - outflow).abs() <= 1e-7, "case {case}: conservation at {v}");
        }
        let paths = round_paths(&graph, &sol.flows, 16, case, 1e-4).unwrap();
        assert!(optimal_paths.contains(&paths[0].vertices), "case {case}: {:?} not in {optimal_paths:?}", paths[0].vertices);
        for p in &paths {
            let r = solve_restriction(&graph, p, &ClarabelSolver, &SolveSettings::default()).unwrap();
            assert!(sol.cost <= r.cost + 1e-6);
        }
    }
}
