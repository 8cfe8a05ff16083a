use std::fs;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ncprotect::analysis::{build_recovery_graph, necessary_conditions, sweep};
use ncprotect::coding::FailurePattern;
use ncprotect::galois::{Field, FieldSpec, Gf};
use ncprotect::provision::{
    baseline_one_plus_one, baseline_sbpp, build_model, compare as compare_schemes, export_model, solve_exact,
    solve_heuristic, solve_monolithic, CompareOptions, CompareRow, Comparison, HeuristicOptions, ProvisionError,
    ProvisionSolution, SolveOptions,
};
use ncprotect::simulator::{self, CoeffChoice, Mode, Outcome, Scenario, SimConfig, SimReport};
use ncprotect::topology::{load_graph, load_traffic, Graph, Provisioning, Route};

use crate::report::{emit, read};
use crate::{
    AnalyzeArgs, CheckFieldArgs, Coeffs, Common, CompareArgs, FieldArgs, ProvisionArgs, Scheme, SimulateArgs, Solver,
};

/// Recorded expectation failures beyond this are only counted.
const LISTED_FAILURES: usize = 50;

impl From<Coeffs> for CoeffChoice {
    fn from(c: Coeffs) -> Self {
        match c {
            Coeffs::Ones => CoeffChoice::Ones,
            Coeffs::Vandermonde => CoeffChoice::Vandermonde,
            Coeffs::Cauchy => CoeffChoice::Cauchy,
            Coeffs::Random => CoeffChoice::Random,
            Coeffs::Complete => CoeffChoice::Complete,
        }
    }
}

fn init_pool(common: &Common) -> Result<()> {
    if common.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build_global()
            .context("starting worker pool")?;
    }
    Ok(())
}

fn field_spec(args: &FieldArgs, fallback: FieldSpec) -> Result<FieldSpec> {
    Ok(match (args.field_bits, args.poly) {
        (None, None) => fallback,
        (Some(bits), None) => FieldSpec::smallest(bits)?,
        (bits, Some(poly)) => FieldSpec::new(bits.unwrap_or(fallback.bits), poly)?,
    })
}

fn load_scenario(topology: &std::path::Path, scenario: &std::path::Path) -> Result<(Graph, Scenario)> {
    let g = load_graph(&read(topology)?).with_context(|| format!("parsing {}", topology.display()))?;
    let sc = Scenario::parse(&g, &read(scenario)?).with_context(|| format!("parsing {}", scenario.display()))?;
    Ok((g, sc))
}

/// `C2 C5 P1`: failed connections then failed walks, numbered from one.
fn pattern_label(p: &FailurePattern) -> String {
    let conns = p.connections.iter().map(|c| format!("C{}", c + 1));
    let walks = p.walks.iter().map(|k| format!("P{}", k + 1));
    conns.chain(walks).collect::<Vec<_>>().join(" ")
}

/// Parameters actually used once scenario defaults and overrides merge.
#[derive(Serialize)]
struct Resolved {
    field: FieldSpec,
    coeffs: CoeffChoice,
    max_failures: usize,
    seed: u64,
}

fn resolve(sc: &Scenario, field: &FieldArgs, coeffs: Option<Coeffs>, max_failures: Option<usize>, seed: Option<u64>) -> Result<Resolved> {
    Ok(Resolved {
        field: field_spec(field, sc.field)?,
        coeffs: coeffs.map_or(sc.coeffs, CoeffChoice::from),
        max_failures: max_failures.unwrap_or_else(|| sc.failure_budget()),
        seed: seed.unwrap_or(sc.seed),
    })
}

#[derive(Serialize)]
struct Config<'a, A> {
    args: &'a A,
    resolved: &'a Resolved,
}

#[derive(Serialize)]
struct UnmetExpectation {
    conn: usize,
    round: u64,
    pattern: String,
    source: Outcome,
    sink: Outcome,
}

#[derive(Serialize)]
struct SimulateResult {
    /// Rounds whose failure pattern has at most `max_failures` members must
    /// recover at both ends, and no decode may ever be wrong or singular.
    expectations_met: bool,
    unmet: usize,
    unmet_listed: Vec<UnmetExpectation>,
    report: SimReport,
}

pub fn simulate(args: &SimulateArgs) -> Result<bool> {
    init_pool(&args.common)?;
    let (g, mut sc) = load_scenario(&args.topology, &args.scenario)?;
    let resolved = resolve(&sc, &args.field, args.coeffs, args.max_failures, args.seed)?;
    sc.seed = resolved.seed;
    let field = Field::new(resolved.field)?;
    let coeffs = sc.coefficients(&field, resolved.coeffs, resolved.max_failures)?;
    let config = SimConfig {
        rounds: args.rounds.unwrap_or(sc.rounds),
        seed: resolved.seed,
        mode: if args.xor { Mode::Xor } else { Mode::Scaled },
    };
    let report = simulator::run(&field, &g, &sc.provisioning, &coeffs, &sc.schedule, &config)?;

    let mut unmet = Vec::new();
    for rec in &report.records {
        let pattern = sc.schedule.pattern(&sc.provisioning, rec.round);
        let size = pattern.connections.len() + pattern.walks.len();
        let bad_decode = |o: Outcome| matches!(o, Outcome::Mismatch | Outcome::Singular);
        let lost = rec.primary_failed
            && size <= resolved.max_failures
            && (rec.source.outcome != Outcome::Recovered || rec.sink.outcome != Outcome::Recovered);
        if lost || bad_decode(rec.source.outcome) || bad_decode(rec.sink.outcome) {
            unmet.push(UnmetExpectation {
                conn: rec.conn,
                round: rec.round,
                pattern: pattern_label(&pattern),
                source: rec.source.outcome,
                sink: rec.sink.outcome,
            });
        }
    }
    let result = SimulateResult {
        expectations_met: unmet.is_empty(),
        unmet: unmet.len(),
        unmet_listed: unmet.into_iter().take(LISTED_FAILURES).collect(),
        report,
    };
    let ok = result.expectations_met;
    emit("simulate", &Config { args, resolved: &resolved }, &result, args.common.output.as_deref())?;
    Ok(ok)
}

#[derive(Serialize)]
struct FailingPattern {
    pattern: String,
    unrecoverable: Vec<String>,
}

#[derive(Serialize)]
struct AnalyzeResult {
    max_failures: usize,
    total_patterns: u128,
    checked: usize,
    /// The pattern cap stopped the sweep early.
    partial: bool,
    recoverable: bool,
    necessary_conditions: Vec<String>,
    failing: Vec<FailingPattern>,
    /// Distinct systems that must be full rank for every checked pattern.
    required_systems: usize,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<bool> {
    init_pool(&args.common)?;
    let (_, mut sc) = load_scenario(&args.topology, &args.scenario)?;
    let resolved = resolve(&sc, &args.field, args.coeffs, args.max_failures, args.seed)?;
    sc.seed = resolved.seed;
    let field = Field::new(resolved.field)?;
    let coeffs = sc.coefficients(&field, resolved.coeffs, resolved.max_failures)?;
    let rg = build_recovery_graph(&sc.provisioning, &coeffs)?;
    let swept = sweep(&field, &rg, resolved.max_failures, args.max_patterns)?;
    let failing: Vec<FailingPattern> = swept
        .failing
        .iter()
        .map(|v| FailingPattern {
            pattern: pattern_label(&v.pattern),
            unrecoverable: v
                .connections
                .iter()
                .filter(|c| !c.recoverable)
                .map(|c| format!("C{}", c.conn + 1))
                .collect(),
        })
        .collect();
    let result = AnalyzeResult {
        max_failures: swept.max_failures,
        total_patterns: swept.total,
        checked: swept.checked,
        partial: swept.partial,
        recoverable: failing.is_empty(),
        necessary_conditions: necessary_conditions(&sc.provisioning, resolved.max_failures)
            .iter()
            .map(ToString::to_string)
            .collect(),
        failing,
        required_systems: swept.required.len(),
    };
    let ok = result.recoverable;
    emit("analyze", &Config { args, resolved: &resolved }, &result, args.common.output.as_deref())?;
    Ok(ok)
}

/// A route as external node ids.
fn nodes(g: &Graph, r: &Route) -> Vec<u64> {
    r.nodes.iter().map(|&v| g.external(v)).collect()
}

#[derive(Serialize)]
struct ConnectionView {
    conn: usize,
    working: Vec<u64>,
}

#[derive(Serialize)]
struct WalkView {
    walk: usize,
    /// Connections numbered from one.
    protects: Vec<usize>,
    nodes: Vec<u64>,
}

/// The plan in external node ids, for reading without the topology.
#[derive(Serialize)]
struct PlanView {
    connections: Vec<ConnectionView>,
    walks: Vec<WalkView>,
}

impl PlanView {
    fn of(g: &Graph, p: &Provisioning) -> Self {
        PlanView {
            connections: p
                .working
                .iter()
                .enumerate()
                .map(|(c, r)| ConnectionView { conn: c + 1, working: nodes(g, r) })
                .collect(),
            walks: p
                .groups
                .iter()
                .enumerate()
                .map(|(k, grp)| WalkView {
                    walk: k + 1,
                    protects: grp.members.iter().map(|c| c + 1).collect(),
                    nodes: nodes(g, &grp.walk),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum ProvisionResult {
    Solved { plan: PlanView, solution: Box<ProvisionSolution> },
    Infeasible { error: String },
}

fn solve_options(budget_ms: Option<u64>) -> SolveOptions {
    SolveOptions {
        time_budget: budget_ms.map(Duration::from_millis),
        jobs: 0,
    }
}

pub fn provision(args: &ProvisionArgs) -> Result<bool> {
    init_pool(&args.common)?;
    let g = load_graph(&read(&args.topology)?).with_context(|| format!("parsing {}", args.topology.display()))?;
    let demands = load_traffic(&g, &read(&args.traffic)?).with_context(|| format!("parsing {}", args.traffic.display()))?;
    let options = solve_options(args.budget_ms);
    if let Some(path) = &args.export_lp {
        let model = build_model(&g, &demands)?;
        fs::write(path, export_model(&model)).with_context(|| format!("writing {}", path.display()))?;
    }
    let solved = match (args.scheme, args.solver) {
        (Scheme::OnePlusOne, _) => baseline_one_plus_one(&g, &demands),
        (Scheme::Sbpp, _) => baseline_sbpp(&g, &demands, &options),
        (Scheme::OnePlusN, Solver::Exact) => build_model(&g, &demands).and_then(|m| solve_exact(&m, &options)),
        (Scheme::OnePlusN, Solver::Monolithic) => build_model(&g, &demands).and_then(|m| solve_monolithic(&m, &options)),
        (Scheme::OnePlusN, Solver::Heuristic) => {
            let h = HeuristicOptions { seed: args.seed, ..HeuristicOptions::default() };
            solve_heuristic(&g, &demands, &h)
        }
    };
    let result = match solved {
        Ok(solution) => ProvisionResult::Solved {
            plan: PlanView::of(&g, &solution.provisioning),
            solution: Box::new(solution),
        },
        Err(e @ (ProvisionError::NotTwoConnected { .. } | ProvisionError::NoSolution)) => {
            ProvisionResult::Infeasible { error: e.to_string() }
        }
        Err(e) => return Err(e.into()),
    };
    let ok = matches!(result, ProvisionResult::Solved { .. });
    emit("provision", args, &result, args.common.output.as_deref())?;
    Ok(ok)
}

pub fn compare(args: &CompareArgs) -> Result<bool> {
    init_pool(&args.common)?;
    if args.counts.contains(&0) {
        bail!("demand counts must be positive");
    }
    let g = load_graph(&read(&args.topology)?).with_context(|| format!("parsing {}", args.topology.display()))?;
    let options = CompareOptions {
        counts: args.counts.clone(),
        draws: args.draws,
        seed: args.seed,
        solve: solve_options(args.budget_ms),
    };
    let result: Comparison = compare_schemes(&g, &options);
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in &result.rows {
            w.serialize::<&CompareRow>(row)?;
        }
        w.flush()?;
    }
    emit("compare", args, &result, args.common.output.as_deref())?;
    Ok(true)
}

#[derive(Serialize)]
struct CheckFieldResult {
    field: FieldSpec,
    exhaustive: bool,
    checks: u64,
    passed: bool,
    /// First few counterexamples.
    failures: Vec<String>,
}

/// Checks per triple; `mul` against the shift-and-xor product covers the
/// table route.
fn check_triple(f: &Field, a: Gf, b: Gf, c: Gf, failures: &mut Vec<String>) -> u64 {
    let mut fail = |what: &str| {
        if failures.len() < LISTED_FAILURES {
            failures.push(format!("{what} at a={} b={} c={}", a.0, b.0, c.0));
        }
    };
    if f.mul(a, b) != f.mul_direct(a, b) {
        fail("table product differs from direct product");
    }
    if f.mul(a, b) != f.mul(b, a) {
        fail("multiplication not commutative");
    }
    if f.mul(f.mul(a, b), c) != f.mul(a, f.mul(b, c)) {
        fail("multiplication not associative");
    }
    if f.mul(a, f.add(b, c)) != f.add(f.mul(a, b), f.mul(a, c)) {
        fail("multiplication does not distribute");
    }
    if f.add(f.add(a, b), c) != f.add(a, f.add(b, c)) {
        fail("addition not associative");
    }
    5
}

fn check_element(f: &Field, a: Gf, failures: &mut Vec<String>) -> Result<u64> {
    let one = f.elem(1)?;
    let zero = f.elem(0)?;
    let mut fail = |what: &str| {
        if failures.len() < LISTED_FAILURES {
            failures.push(format!("{what} at a={}", a.0));
        }
    };
    if f.mul(a, one) != a || f.add(a, zero) != a {
        fail("identity");
    }
    if f.add(a, a) != zero {
        fail("characteristic two");
    }
    if !a.is_zero() && f.mul(a, f.inv(a)?) != one {
        fail("inverse");
    }
    Ok(3)
}

/// Fields this small have every triple checked.
const EXHAUSTIVE_BITS: u8 = 6;

pub fn check_field(args: &CheckFieldArgs) -> Result<bool> {
    let spec = match args.poly {
        Some(poly) => FieldSpec::new(args.field_bits, poly)?,
        None => FieldSpec::smallest(args.field_bits)?,
    };
    let f = Field::new(spec)?;
    let mut failures = Vec::new();
    let mut checks = 0;
    for a in f.elements() {
        checks += check_element(&f, a, &mut failures)?;
    }
    let exhaustive = spec.bits <= EXHAUSTIVE_BITS;
    if exhaustive {
        for a in f.elements() {
            for b in f.elements() {
                for c in f.elements() {
                    checks += check_triple(&f, a, b, c, &mut failures);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let order = f.order();
        for _ in 0..args.samples {
            let [a, b, c] = [(); 3].map(|_| f.elem(rng.gen_range(0..order)).expect("below field order"));
            checks += check_triple(&f, a, b, c, &mut failures);
        }
    }
    let result = CheckFieldResult {
        field: spec,
        exhaustive,
        checks,
        passed: failures.is_empty(),
        failures,
    };
    let ok = result.passed;
    emit("check-field", args, &result, args.common.output.as_deref())?;
    Ok(ok)
}
