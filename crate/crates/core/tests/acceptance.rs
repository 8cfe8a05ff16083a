//! One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use itertools::Itertools;
use ncprotect::analysis::{build_recovery_graph, check_pattern, patterns};
use ncprotect::coding::{
    assign_all_ones, assign_cauchy, assign_vandermonde, full_rank_probability, random_matrix, FailurePattern,
    ProtectionMask, Sampling, Submatrix,
};
use ncprotect::galois::{Field, FieldSpec, Gf};
use ncprotect::provision::{
    baseline_one_plus_one, build_model, compare, solve_exact, solve_heuristic, CompareOptions, HeuristicOptions,
    SolveOptions,
};
use ncprotect::simulator::{run, LinkSchedule, Mode, Outcome, RoundRange, Scenario, SimConfig, SimReport};
use ncprotect::topology::{
    load_graph, load_traffic, validate_provisioning, EdgeId, GroupSpec, Graph, NodeId, Provisioning, Route,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    ensure(started.elapsed() <= limit, || format!("took {:.1?}, limit {limit:?}", started.elapsed()))
}

const SIXPAIR: &str = include_str!("../fixtures/sixpair.topo");

/// Every scenario fixture with its topology.
fn scenarios() -> Vec<(&'static str, Graph, Scenario)> {
    [
        ("line10", include_str!("../fixtures/line10.topo"), include_str!("../fixtures/line10.scn")),
        ("nsfnet", include_str!("../fixtures/nsfnet.topo"), include_str!("../fixtures/nsfnet.scn")),
        ("sixpair", SIXPAIR, include_str!("../fixtures/sixpair.scn")),
        ("sixpair_full", SIXPAIR, include_str!("../fixtures/sixpair_full.scn")),
        ("fourpair", SIXPAIR, include_str!("../fixtures/fourpair.scn")),
        ("threewalk", SIXPAIR, include_str!("../fixtures/threewalk.scn")),
    ]
    .into_iter()
    .map(|(name, topo, scn)| {
        let g = load_graph(topo).unwrap();
        let sc = Scenario::parse(&g, scn).unwrap();
        (name, g, sc)
    })
    .collect()
}

fn simulate(g: &Graph, sc: &Scenario, schedule: &LinkSchedule) -> SimReport {
    let f = Field::new(sc.field).unwrap();
    let coeffs = sc.coefficients(&f, sc.coeffs, sc.failure_budget()).unwrap();
    let config = SimConfig {
        rounds: sc.rounds,
        seed: sc.seed,
        mode: Mode::Scaled,
    };
    run(&f, g, &sc.provisioning, &coeffs, schedule, &config).unwrap()
}

fn with_failure(schedule: &LinkSchedule, e: EdgeId, from: u64) -> LinkSchedule {
    let mut s = schedule.clone();
    s.link_failures.push((e, RoundRange { from, to: None }));
    s
}

/// Carry-less product reduced by `poly`, one bit at a time.
fn slow_mul(a: u32, b: u32, bits: u8, poly: u32) -> u32 {
    let mut acc = 0u32;
    for i in (0..bits).rev() {
        acc <<= 1;
        if acc >> bits & 1 == 1 {
            acc ^= poly;
        }
        if b >> i & 1 == 1 {
            acc ^= a;
        }
    }
    acc
}

fn ac1_field() -> Check {
    let started = Instant::now();
    let mut checks = 0u64;
    for bits in 2..=4u8 {
        let spec = FieldSpec::smallest(bits).unwrap();
        let f = Field::new(spec).unwrap();
        let all: Vec<Gf> = f.elements().collect();
        for &a in &all {
            ensure(f.add(a, Gf(0)) == a && f.mul(a, Gf(1)) == a, || format!("identity fails at {a:?}"))?;
            ensure(f.add(a, a) == Gf(0), || format!("{a:?} is not its own negative"))?;
            if a != Gf(0) {
                ensure(f.mul(a, f.inv(a).unwrap()) == Gf(1), || format!("inverse of {a:?}"))?;
            }
            for &b in &all {
                let ab = f.mul(a, b);
                ensure(ab == f.mul(b, a) && f.add(a, b) == f.add(b, a), || format!("commutativity at {a:?} {b:?}"))?;
                ensure(u32::from(ab.0) == slow_mul(a.0.into(), b.0.into(), bits, spec.poly), || {
                    format!("product {a:?}*{b:?} in GF(2^{bits})")
                })?;
                for &c in &all {
                    checks += 1;
                    ensure(f.mul(ab, c) == f.mul(a, f.mul(b, c)), || "associativity".into())?;
                    ensure(f.add(f.add(a, b), c) == f.add(a, f.add(b, c)), || "additive associativity".into())?;
                    ensure(f.mul(a, f.add(b, c)) == f.add(ab, f.mul(a, c)), || "distributivity".into())?;
                }
            }
        }
    }
    let f = Field::gf256();
    let poly = f.spec().poly;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100_000 {
        let (a, b, c) = (Gf(rng.gen_range(0..256)), Gf(rng.gen_range(0..256)), Gf(rng.gen_range(1..256)));
        let ab = f.mul(a, b);
        ensure(u32::from(ab.0) == slow_mul(a.0.into(), b.0.into(), 8, poly), || format!("GF(256) {a:?}*{b:?}"))?;
        ensure(f.mul(f.div(ab, c).unwrap(), c) == ab, || format!("GF(256) division by {c:?}"))?;
        ensure(f.mul(a, f.add(b, c)) == f.add(ab, f.mul(a, c)), || "GF(256) distributivity".into())?;
        checks += 1;
    }
    within(started, Duration::from_secs(5))?;
    Ok(format!("{checks} checks in {:.2?}", started.elapsed()))
}

/// Every working link of every connection fails from round `from`; both
/// endpoints of the connection must recover every later round.
fn single_failures_recover(g: &Graph, p: &Provisioning, rounds: u64) -> Result<usize, String> {
    let f = Field::gf256();
    let coeffs = assign_all_ones(&ProtectionMask::from_provisioning(p), &f);
    let config = SimConfig {
        rounds,
        seed: 3,
        mode: Mode::Scaled,
    };
    let from = 1;
    let mut failures = 0;
    for (c, path) in p.working.iter().enumerate() {
        for &e in &path.edges {
            let r = run(&f, g, p, &coeffs, &with_failure(&LinkSchedule::default(), e, from), &config)
                .map_err(|err| err.to_string())?;
            for rec in r.records.iter().filter(|rec| rec.conn == c + 1 && rec.round >= from) {
                ensure(
                    rec.source.outcome == Outcome::Recovered && rec.sink.outcome == Outcome::Recovered,
                    || format!("C{} link {} round {}: {:?}", c + 1, e.0, rec.round, (rec.source, rec.sink)),
                )?;
            }
            failures += 1;
        }
    }
    Ok(failures)
}

fn ac2_single_failure() -> Check {
    let started = Instant::now();
    let g = load_graph(include_str!("../fixtures/nsfnet.topo")).unwrap();
    let sc = Scenario::parse(&g, include_str!("../fixtures/nsfnet.scn")).unwrap();
    let mut failures = single_failures_recover(&g, &sc.provisioning, 6)?;
    let mut rng = common::seeded(2024);
    let mut shared = 0;
    for case in 0..25 {
        let nodes = rng.gen_range(5..=12);
        let chords = rng.gen_range(2..=nodes);
        let g = common::random_two_connected(&mut rng, nodes, chords, 9);
        let count = rng.gen_range(2..=6);
        let d = common::random_demands(&mut rng, nodes, count);
        let options = HeuristicOptions {
            seed: case,
            max_group: Some(4),
            ..HeuristicOptions::default()
        };
        let s = solve_heuristic(&g, &d, &options).map_err(|e| format!("graph {case}: {e}"))?;
        shared += s.provisioning.groups.iter().filter(|k| k.members.len() > 1).count();
        failures += single_failures_recover(&g, &s.provisioning, 5).map_err(|e| format!("graph {case}: {e}"))?;
    }
    within(started, Duration::from_secs(60))?;
    Ok(format!(
        "{failures} single working-link failures on NSFNET and 25 random graphs ({shared} shared groups), {:.1?}",
        started.elapsed()
    ))
}

fn ac3_worked_examples() -> Check {
    let g = load_graph(include_str!("../fixtures/line10.topo")).unwrap();
    let sc = Scenario::parse(&g, include_str!("../fixtures/line10.scn")).unwrap();
    // Connection 5 joins S5 (node 5) and T3 (node 7).
    let e = g.edge_between(g.lookup(5).unwrap(), g.lookup(7).unwrap(), &[]).unwrap();
    let r = simulate(&g, &sc, &with_failure(&sc.schedule, e, 0));
    for rec in r.records.iter().filter(|rec| rec.conn == 5) {
        ensure(rec.source.outcome == Outcome::Recovered, || format!("S5 round {}: {:?}", rec.round, rec.source))?;
    }

    let g = load_graph(SIXPAIR).unwrap();
    let sc = Scenario::parse(&g, include_str!("../fixtures/sixpair.scn")).unwrap();
    let f = Field::new(sc.field).unwrap();
    let coeffs = sc.coefficients(&f, sc.coeffs, sc.failure_budget()).unwrap();
    let rg = build_recovery_graph(&sc.provisioning, &coeffs).unwrap();
    let verdicts = |pattern: FailurePattern| -> Vec<(usize, bool)> {
        let v = check_pattern(&f, &rg, &pattern).unwrap();
        v.connections.iter().map(|c| (c.conn + 1, c.recoverable)).collect()
    };
    let triple = verdicts(FailurePattern::new([1, 4, 5], []));
    ensure(triple == vec![(2, true), (5, false), (6, true)], || format!("C2, C5, C6 failed: {triple:?}"))?;
    let with_walk = verdicts(FailurePattern::new([1, 5], [1]));
    ensure(with_walk == vec![(2, true), (6, false)], || format!("P2, C2, C6 failed: {with_walk:?}"))?;

    let mut s = sc.schedule.clone();
    for (u, v) in [(2, 3), (10, 11), (8, 9)] {
        let e = g.edge_between(g.lookup(u).unwrap(), g.lookup(v).unwrap(), &[]).unwrap();
        s.link_failures.push((e, RoundRange { from: 0, to: None }));
    }
    let r = simulate(&g, &sc, &s);
    for rec in &r.records {
        let want = match rec.conn {
            2 | 6 => Outcome::Recovered,
            5 => Outcome::Insufficient,
            _ => continue,
        };
        ensure(rec.source.outcome == want && rec.sink.outcome == want, || {
            format!("simulated C{} round {}: {:?}", rec.conn, rec.round, (rec.source, rec.sink))
        })?;
    }
    Ok("S5 recovers its partner's unit every round; both failure-pattern verdicts match".into())
}

fn ac4_static_dynamic() -> Check {
    let mut compared = 0;
    let mut fixtures = Vec::new();
    for (name, g, sc) in scenarios() {
        let p = &sc.provisioning;
        if p.demands.len() > 4 || p.groups.len() > 3 {
            continue;
        }
        fixtures.push(name);
        let f = Field::new(sc.field).unwrap();
        let coeffs = sc.coefficients(&f, sc.coeffs, 2).unwrap();
        let rg = build_recovery_graph(p, &coeffs).unwrap();
        let config = SimConfig {
            rounds: 3,
            seed: sc.seed,
            mode: Mode::Scaled,
        };
        for target in patterns(p.demands.len(), p.groups.len(), 2) {
            let mut s = sc.schedule.clone();
            for &c in &target.connections {
                s.link_failures.push((p.working[c].edges[0], RoundRange { from: 0, to: None }));
            }
            for &k in &target.walks {
                s.walk_failures.push((k, RoundRange { from: 0, to: None }));
            }
            // A working link may also lie on another group's walk.
            let pattern = s.pattern(p, 0);
            let verdict = check_pattern(&f, &rg, &pattern).unwrap();
            let r = run(&f, &g, p, &coeffs, &s, &config).map_err(|e| e.to_string())?;
            for rec in &r.records {
                let failed = pattern.connections.contains(&(rec.conn - 1));
                ensure(rec.primary_failed == failed, || format!("{name} {pattern:?}: C{} primary", rec.conn))?;
                if !failed {
                    continue;
                }
                let recoverable = verdict.verdict(rec.conn - 1).unwrap().recoverable;
                for end in [rec.source.outcome, rec.sink.outcome] {
                    ensure((end == Outcome::Recovered) == recoverable && (recoverable || end.is_loss()), || {
                        format!("{name} {pattern:?}: C{} static {recoverable}, simulated {end:?}", rec.conn)
                    })?;
                }
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} patterns on {}", fixtures.join(", ")))
}

fn full_rank(f: &Field, m: &ncprotect::galois::FieldMatrix, size: usize) -> bool {
    f.rank(m).unwrap() == size
}

fn ac5_coefficients() -> Check {
    let f = Field::gf256();
    let mut vandermonde = 0;
    for conns in 1..=8 {
        for walks in 1..=4.min(conns) {
            let c = assign_vandermonde(&ProtectionMask::full(walks, conns), &f).unwrap();
            for size in 1..=walks {
                for cols in (0..conns).combinations(size) {
                    let sub = Submatrix {
                        rows: (0..walks).collect(),
                        cols: cols.clone(),
                    };
                    ensure(full_rank(&f, &c.submatrix(&sub), size), || format!("Vandermonde {walks}x{conns} columns {cols:?}"))?;
                    vandermonde += 1;
                }
            }
        }
    }
    let mut cauchy = 0;
    for walks in 1..=5 {
        for conns in 1..=5 {
            let c = assign_cauchy(&ProtectionMask::full(walks, conns), &f).unwrap();
            for size in 1..=walks.min(conns) {
                for rows in (0..walks).combinations(size) {
                    for cols in (0..conns).combinations(size) {
                        let sub = Submatrix {
                            rows: rows.clone(),
                            cols,
                        };
                        ensure(full_rank(&f, &c.submatrix(&sub), size), || format!("Cauchy {walks}x{conns} {sub:?}"))?;
                        cauchy += 1;
                    }
                }
            }
        }
    }
    let mut rates = Vec::new();
    for (bits, q) in [(4u8, 16u32), (8, 256)] {
        let field = Field::new(FieldSpec::smallest(bits).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(q));
        for size in [2usize, 3, 4] {
            let trials = 10_000;
            let hits = (0..trials)
                .filter(|_| full_rank(&field, &random_matrix(&field, size, size, &mut rng, Sampling::Uniform), size))
                .count();
            let p = full_rank_probability(q, size);
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let rate = hits as f64 / trials as f64;
            ensure((rate - p).abs() <= 3.0 * sigma, || {
                format!("q={q} {size}x{size}: rate {rate:.4}, expected {p:.4} +- {:.4}", 3.0 * sigma)
            })?;
            rates.push(format!("q={q} t={size} {rate:.4}/{p:.4}"));
        }
    }
    Ok(format!(
        "{vandermonde} Vandermonde and {cauchy} Cauchy submatrices full rank; random rates {}",
        rates.join(", ")
    ))
}

fn ac6_bounds() -> Check {
    let mut runs = 0;
    for (name, g, sc) in scenarios() {
        let mut schedules = vec![sc.schedule.clone()];
        let mut uneven = sc.schedule.clone();
        for (i, (e, _)) in g.edges().enumerate() {
            uneven.delays.insert(e, 1 + (i as u64 * 7) % 5);
        }
        schedules.push(uneven.clone());
        for path in &sc.provisioning.working {
            for &e in &path.edges {
                schedules.push(with_failure(&sc.schedule, e, 2));
                schedules.push(with_failure(&uneven, e, 2));
            }
        }
        for s in schedules {
            let r = simulate(&g, &sc, &s);
            if let Some(b) = r.buffers.iter().find(|b| !b.within_bounds()) {
                return Err(format!("{name}: buffers {b:?}"));
            }
            if r.max_working_delay <= r.protection_delay {
                ensure(r.round_numbers.peak_in_flight <= 2 * r.round_numbers.bound.a, || {
                    format!("{name}: {} rounds in flight, a = {}", r.round_numbers.peak_in_flight, r.round_numbers.bound.a)
                })?;
                ensure(r.max_latency <= 2 * r.protection_delay, || {
                    format!("{name}: latency {} over twice {}", r.max_latency, r.protection_delay)
                })?;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} simulations within buffer, round-number and latency bounds"))
}

fn ac7_exact_vs_enumeration() -> Check {
    let started = Instant::now();
    let mut rng = common::seeded(77);
    let mut shared = 0;
    let cases = 24;
    for case in 0..cases {
        let nodes = 4 + case % 3;
        let g = common::random_two_connected(&mut rng, nodes, 1 + case % 5, 6);
        let d = common::random_demands(&mut rng, nodes, 1 + case % 2);
        let s = solve_exact(&build_model(&g, &d).unwrap(), &SolveOptions::default()).map_err(|e| e.to_string())?;
        let brute = common::brute_force(&g, &d);
        ensure(s.is_optimal() && s.cost == brute, || format!("case {case}: exact {} vs enumeration {brute}", s.cost))?;
        ensure(validate_provisioning(&g, &s.provisioning).is_empty(), || format!("case {case}: invalid solution"))?;
        shared += usize::from(s.provisioning.groups.iter().any(|k| k.members.len() > 1));
    }
    within(started, Duration::from_secs(120))?;
    Ok(format!("{cases} instances equal ({shared} with a shared walk), {:.1?}", started.elapsed()))
}

fn ac8_cost_trend() -> Check {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (name, topo) in [
        ("NSFNET", include_str!("../fixtures/nsfnet_synthetic.topo")),
        ("COST239", include_str!("../fixtures/cost239_synthetic.topo")),
    ] {
        let g = load_graph(topo).unwrap();
        let options = CompareOptions {
            counts: vec![2, 3, 4, 5],
            draws: 10,
            seed: 8,
            solve: SolveOptions {
                time_budget: Some(Duration::from_secs(6)),
                jobs: 0,
            },
        };
        let c = compare(&g, &options);
        for row in &c.rows {
            lines.push(format!(
                "{name} N={} proved {}/{} ratio 1+N {:.3} 1+1 {:.3}",
                row.count, row.proved, options.draws, row.ratio_one_plus_n, row.ratio_one_plus_one
            ));
            if row.order_violations > 0 {
                failures.push(format!("{name} N={}: {} ordering violations", row.count, row.order_violations));
            }
            if row.ratio_one_plus_n.partial_cmp(&row.ratio_one_plus_one) != Some(std::cmp::Ordering::Less) {
                failures.push(format!("{name} N={}: 1+N ratio not below 1+1", row.count));
            }
            if row.solved < options.draws {
                failures.push(format!("{name} N={}: {} draws unsolved", row.count, options.draws - row.solved));
            }
        }
    }
    for line in &lines {
        println!("    {line}");
    }
    if started.elapsed() > Duration::from_secs(600) {
        failures.push(format!("took {:.0?}", started.elapsed()));
    }
    if failures.is_empty() {
        Ok(format!("{:.1?}", started.elapsed()))
    } else {
        Err(failures.join("; "))
    }
}

fn ac9_fig7() -> Check {
    let g = load_graph(include_str!("../fixtures/shared.topo")).unwrap();
    let d = load_traffic(&g, include_str!("../fixtures/shared.traffic")).unwrap();
    let route = |nodes: &[usize]| Route::from_nodes(&g, &nodes.iter().map(|&v| NodeId(v)).collect::<Vec<_>>()).unwrap();
    let depicted = Provisioning {
        demands: d.clone(),
        working: vec![route(&[0, 3]), route(&[5, 3, 2])],
        groups: vec![GroupSpec {
            walk: route(&[5, 0, 2, 1, 3]),
            reverse: None,
            members: vec![0, 1],
        }],
    };
    ensure(validate_provisioning(&g, &depicted).is_empty(), || "depicted solution is invalid".into())?;
    let want = depicted.total_cost(&g);
    let s = solve_exact(&build_model(&g, &d).unwrap(), &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(s.is_optimal() && s.cost == want, || format!("solved {} vs depicted {want}", s.cost))?;
    let dedicated = baseline_one_plus_one(&g, &d).unwrap().cost;
    Ok(format!("cost {want}, dedicated pairs {dedicated}"))
}

type Criterion = (&'static str, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "field correctness", ac1_field),
        ("AC2", "single-failure completeness", ac2_single_failure),
        ("AC3", "worked examples", ac3_worked_examples),
        ("AC4", "static and dynamic agreement", ac4_static_dynamic),
        ("AC5", "coefficient guarantees", ac5_coefficients),
        ("AC6", "simulation bounds", ac6_bounds),
        ("AC7", "exact provisioning against enumeration", ac7_exact_vs_enumeration),
        ("AC8", "cost trend", ac8_cost_trend),
        ("AC9", "shared walk example", ac9_fig7),
    ];
    let only: BTreeSet<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(id) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

