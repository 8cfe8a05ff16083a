mod common;

use std::time::Duration;

use ncprotect::analysis::{build_recovery_graph, sweep, DEFAULT_PATTERN_CAP};
use ncprotect::coding::assign_all_ones;
use ncprotect::coding::ProtectionMask;
use ncprotect::galois::Field;
use ncprotect::provision::{
    baseline_one_plus_one, baseline_sbpp, build_model, export_model, protect_group, solve_exact, solve_heuristic,
    solve_monolithic, HeuristicOptions, Optimality, ProvisionError, ProvisionSolution, SolveOptions,
};
use ncprotect::topology::{load_graph, load_traffic, validate_provisioning, Demand, Graph, NodeId};

fn triangle() -> (Graph, Vec<Demand>) {
    let g = Graph::with_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
    (g, vec![Demand { s: NodeId(0), t: NodeId(1) }])
}

fn shared() -> (Graph, Vec<Demand>) {
    let g = load_graph(include_str!("../fixtures/shared.topo")).unwrap();
    let d = load_traffic(&g, include_str!("../fixtures/shared.traffic")).unwrap();
    (g, d)
}

fn nsfnet() -> (Graph, Vec<Demand>) {
    let g = load_graph(include_str!("../fixtures/nsfnet.topo")).unwrap();
    let d = load_traffic(&g, include_str!("../fixtures/nsfnet.traffic")).unwrap();
    (g, d)
}

fn exact(g: &Graph, d: &[Demand]) -> ProvisionSolution {
    solve_exact(&build_model(g, d).unwrap(), &SolveOptions::default()).unwrap()
}

fn assert_valid(g: &Graph, s: &ProvisionSolution) {
    assert!(validate_provisioning(g, &s.provisioning).is_empty());
    for c in 0..s.provisioning.demands.len() {
        assert_eq!(s.provisioning.protecting(c).len(), 1, "C{} protected once", c + 1);
    }
}

#[test]
fn triangle_costs_three_under_every_scheme() {
    let (g, d) = triangle();
    let s = exact(&g, &d);
    assert_eq!((s.working_cost, s.protection_cost, s.cost), (1.0, 2.0, 3.0));
    assert!(s.is_optimal());
    assert_eq!(common::brute_force(&g, &d), 3.0);
    assert_eq!(baseline_one_plus_one(&g, &d).unwrap().cost, 3.0);
    assert_eq!(baseline_sbpp(&g, &d, &SolveOptions::default()).unwrap().cost, 3.0);
    let mono = solve_monolithic(&build_model(&g, &d).unwrap(), &SolveOptions::default()).unwrap();
    assert_eq!(mono.cost, 3.0);
}

#[test]
fn nsfnet_two_demand_model_has_214_core_variables() {
    let (g, d) = nsfnet();
    let m = build_model(&g, &d[..2]).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (14, 21));
    assert_eq!(m.core_variable_count(), 3 * 2 * 14 + 3 * 2 * 21 + 2 * 2);
    assert_eq!(m.core_variable_count(), 214);
    let text = export_model(&m);
    let mut declared = 0;
    let mut section = "";
    for line in text.lines() {
        match line {
            "General" | "Binary" | "End" | "Bounds" | "Subject To" | "Minimize" => section = line,
            _ if section == "General" || section == "Binary" => declared += line.split_whitespace().count(),
            _ => {}
        }
    }
    assert_eq!(declared, m.core_variable_count() + m.terminal_variable_count());
    assert_eq!(text, export_model(&build_model(&g, &d[..2]).unwrap()));
}

#[test]
fn shared_walk_example_costs_twelve() {
    let (g, d) = shared();
    let m = build_model(&g, &d).unwrap();
    let s = solve_monolithic(&m, &SolveOptions::default()).unwrap();
    assert_eq!(s.cost, 12.0);
    assert!(s.is_optimal());
    assert_eq!(s.provisioning.groups.len(), 1);
    assert_valid(&g, &s);
    let dec = solve_exact(&m, &SolveOptions::default()).unwrap();
    assert_eq!(dec.cost, 12.0);
    assert_eq!(common::brute_force(&g, &d), 12.0);
    assert!(baseline_one_plus_one(&g, &d).unwrap().cost > 12.0);
}

#[test]
fn exact_matches_enumeration_on_small_graphs() {
    let mut rng = common::seeded(7);
    for case in 0..12 {
        let nodes = 4 + case % 3;
        let g = common::random_two_connected(&mut rng, nodes, 1 + case % 4, 5);
        let d = common::random_demands(&mut rng, nodes, 1 + case % 2);
        let s = exact(&g, &d);
        assert!(s.is_optimal());
        assert_valid(&g, &s);
        assert_eq!(s.cost, common::brute_force(&g, &d), "case {case}");
        if case < 4 {
            let mono = solve_monolithic(&build_model(&g, &d).unwrap(), &SolveOptions::default()).unwrap();
            assert_eq!(mono.cost, s.cost, "case {case}");
        }
    }
}

#[test]
fn scheme_costs_are_ordered() {
    let mut rng = common::seeded(11);
    for case in 0..6 {
        let g = common::random_two_connected(&mut rng, 7, 4, 9);
        let d = common::random_demands(&mut rng, 7, 3);
        let one_n = exact(&g, &d);
        let dedicated = baseline_one_plus_one(&g, &d).unwrap();
        let sbpp = baseline_sbpp(&g, &d, &SolveOptions::default()).unwrap();
        assert!(one_n.is_optimal() && sbpp.is_optimal());
        assert!(sbpp.cost <= one_n.cost + 1e-9, "case {case}");
        assert!(one_n.cost <= dedicated.cost + 1e-9, "case {case}");
        if one_n.provisioning.groups.iter().all(|k| k.members.len() == 1) {
            assert_eq!(one_n.cost, dedicated.cost);
        }
        let heuristic = solve_heuristic(&g, &d, &HeuristicOptions::default()).unwrap();
        assert_eq!(heuristic.optimality, Optimality::Heuristic);
        assert!(heuristic.cost >= one_n.cost - 1e-9, "case {case}");
        assert_valid(&g, &heuristic);
    }
}

#[test]
fn dedicated_pair_costs_at_least_one_link_more_than_shortest_path() {
    let (g, d) = nsfnet();
    let s = baseline_one_plus_one(&g, &d).unwrap();
    for (c, k) in s.provisioning.groups.iter().enumerate() {
        let min_link = g.edges().map(|(_, e)| e.cost).fold(f64::INFINITY, f64::min);
        assert!(k.walk.cost(&g) >= min_link);
        assert!(s.provisioning.working[c].cost(&g) <= k.walk.cost(&g));
    }
}

#[test]
fn heuristic_is_deterministic_and_finds_shared_partition() {
    let (g, d) = nsfnet();
    let options = HeuristicOptions {
        seed: 3,
        ..HeuristicOptions::default()
    };
    let a = solve_heuristic(&g, &d, &options).unwrap();
    let b = solve_heuristic(&g, &d, &options).unwrap();
    assert_eq!(a, b);
    assert_valid(&g, &a);
    assert!(a.cost <= baseline_one_plus_one(&g, &d).unwrap().cost);
    for members in [[0, 1], [2, 3]] {
        assert!(protect_group(&g, &d, &members, 0).is_some());
    }
}

#[test]
fn single_demand_sbpp_equals_dedicated_pair() {
    let (g, d) = nsfnet();
    for demand in &d {
        let one = [*demand];
        let sbpp = baseline_sbpp(&g, &one, &SolveOptions::default()).unwrap();
        assert_eq!(sbpp.cost, baseline_one_plus_one(&g, &one).unwrap().cost);
    }
}

#[test]
fn provisioned_groups_survive_every_single_failure() {
    let (g, d) = nsfnet();
    let s = solve_exact(
        &build_model(&g, &d).unwrap(),
        &SolveOptions {
            time_budget: Some(Duration::from_secs(60)),
            jobs: 0,
        },
    )
    .unwrap();
    assert_valid(&g, &s);
    let f = Field::gf256();
    let coeffs = assign_all_ones(&ProtectionMask::from_provisioning(&s.provisioning), &f);
    let rg = build_recovery_graph(&s.provisioning, &coeffs).unwrap();
    let result = sweep(&f, &rg, 1, DEFAULT_PATTERN_CAP).unwrap();
    assert!(result.failing.is_empty());
}

#[test]
fn bridge_gives_infeasibility_certificate() {
    let g = Graph::with_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)]);
    let d = [Demand { s: NodeId(0), t: NodeId(3) }];
    let err = solve_exact(&build_model(&g, &d).unwrap(), &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, ProvisionError::NotTwoConnected { conn: 0, .. }));
    assert!(baseline_sbpp(&g, &d, &SolveOptions::default()).is_err());
}
