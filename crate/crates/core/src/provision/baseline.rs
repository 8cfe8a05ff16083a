//! Dedicated (1+1) and shared backup path (SBPP) baselines.
//!
//! Under SBPP every connection gets a working and a backup path. A link
//! reserves, for its backups, the largest number of connections any single
//! link failure switches onto it; backups whose working paths are disjoint
//! share those units.

use std::collections::BTreeSet;

use milp::{solve, Cut, Incumbent, LinearProgram, MipOptions, MipStatus, Sense, Separator, VarId, VarKind};

use super::path_rows::PathRows;
use super::{
    check_demands, disjoint_pair, euler_trail, Optimality, ProvisionError, ProvisionSolution, Scheme, SolveOptions,
    SolveStats,
};
use crate::topology::{remove_loops, shortest_path, Demand, EdgeId, GroupSpec, Graph, Provisioning, Route};

/// Cheapest link-disjoint pair per demand; the cheaper path works.
pub fn baseline_one_plus_one(g: &Graph, demands: &[Demand]) -> Result<ProvisionSolution, ProvisionError> {
    check_demands(g, demands)?;
    let mut working = Vec::new();
    let mut groups = Vec::new();
    for (c, d) in demands.iter().enumerate() {
        let (a, b) = disjoint_pair(g, c, *d)?;
        working.push(a);
        groups.push(GroupSpec {
            walk: b,
            reverse: None,
            members: vec![c],
        });
    }
    let provisioning = Provisioning {
        demands: demands.to_vec(),
        working,
        groups,
    };
    ProvisionSolution::new(g, Scheme::OnePlusOne, provisioning, Optimality::ProvedOptimal, None)
}

/// Spare units per link for the given working and backup paths.
pub(crate) fn spare_capacity(g: &Graph, working: &[Route], backup: &[Route]) -> Vec<u32> {
    let m = g.num_edges();
    let mut spare = vec![0u32; m];
    for l in 0..m {
        let mut load = vec![0u32; m];
        for (w, b) in working.iter().zip(backup) {
            if w.edges.contains(&EdgeId(l)) {
                for e in &b.edges {
                    load[e.0] += 1;
                }
            }
        }
        for e in 0..m {
            spare[e] = spare[e].max(load[e]);
        }
    }
    spare
}

fn sbpp_cost(g: &Graph, working: &[Route], backup: &[Route]) -> f64 {
    let spare = spare_capacity(g, working, backup);
    working.iter().map(|r| r.cost(g)).sum::<f64>()
        + g.edges().map(|(e, edge)| edge.cost * spare[e.0] as f64).sum::<f64>()
}

/// Dedicated pairs, then each backup rerouted in turn over links priced by
/// the spare units it would add, until a pass changes nothing.
fn sharing_start(g: &Graph, demands: &[Demand]) -> Result<(Vec<Route>, Vec<Route>), ProvisionError> {
    let mut working = Vec::new();
    let mut backup = Vec::new();
    for (c, d) in demands.iter().enumerate() {
        let (a, b) = disjoint_pair(g, c, *d)?;
        working.push(a);
        backup.push(b);
    }
    let m = g.num_edges();
    for _ in 0..10 {
        let mut changed = false;
        for j in 0..demands.len() {
            let mut load = vec![vec![0u32; m]; m];
            for k in (0..demands.len()).filter(|&k| k != j) {
                for l in &working[k].edges {
                    for e in &backup[k].edges {
                        load[l.0][e.0] += 1;
                    }
                }
            }
            let own: BTreeSet<EdgeId> = working[j].edges.iter().copied().collect();
            let extra: Vec<f64> = (0..m)
                .map(|e| {
                    let now = (0..m).map(|l| load[l][e]).max().unwrap_or(0);
                    let with = own.iter().map(|l| load[l.0][e] + 1).max().unwrap_or(0).max(now);
                    g.edge(EdgeId(e)).cost * (with - now) as f64
                })
                .collect();
            let d = demands[j];
            let Some(route) = shortest_path(g, d.s, d.t, |e| (!own.contains(&e)).then(|| extra[e.0])) else {
                continue;
            };
            let mut trial = backup.clone();
            trial[j] = route;
            if sbpp_cost(g, &working, &trial) < sbpp_cost(g, &working, &backup) - 1e-9 {
                backup = trial;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((working, backup))
}

struct SbppModel {
    lp: LinearProgram<f64>,
    w: Vec<Vec<VarId>>,
    b: Vec<Vec<VarId>>,
    zw: Vec<Vec<VarId>>,
    zb: Vec<Vec<VarId>>,
    spare: Vec<VarId>,
}

fn sbpp_model(g: &Graph, demands: &[Demand]) -> SbppModel {
    let mut lp = LinearProgram::new();
    let n = demands.len();
    let mut w = Vec::new();
    let mut b = Vec::new();
    let mut zw = Vec::new();
    let mut zb = Vec::new();
    for (j, d) in demands.iter().enumerate() {
        for (tag, cost_of, paths, parity) in [("w", true, &mut w, &mut zw), ("b", false, &mut b, &mut zb)] {
            let vars: Vec<VarId> = g
                .edges()
                .map(|(e, edge)| {
                    let v = lp.add_binary(format!("{tag}{}_{}", j + 1, e.0), if cost_of { edge.cost } else { 0.0 });
                    lp.set_branch_class(v, 0);
                    v
                })
                .collect();
            let zs: Vec<VarId> = g
                .node_ids()
                .map(|v| {
                    let upper = if v == d.s || v == d.t { 0.0 } else { 1.0 };
                    let z = lp.add_var(format!("z{tag}{}_{}", j + 1, g.external(v)), 0.0, Some(upper), 0.0, VarKind::Integer);
                    lp.set_branch_class(z, 2);
                    z
                })
                .collect();
            for v in g.node_ids() {
                let mut terms: Vec<(VarId, f64)> = g.incident(v).iter().map(|(e, _)| (vars[e.0], 1.0)).collect();
                if v == d.s || v == d.t {
                    lp.add_row(format!("d{tag}{}_{}", j + 1, g.external(v)), terms, Sense::Eq, 1.0);
                } else {
                    terms.push((zs[v.0], -2.0));
                    lp.add_row(format!("d{tag}{}_{}", j + 1, g.external(v)), terms, Sense::Eq, 0.0);
                }
            }
            paths.push(vars);
            parity.push(zs);
        }
    }
    let spare: Vec<VarId> = g
        .edges()
        .map(|(e, edge)| {
            let v = lp.add_var(format!("s_{}", e.0), 0.0, Some(n as f64), edge.cost, VarKind::Integer);
            lp.set_branch_class(v, 1);
            v
        })
        .collect();
    for j in 0..n {
        for (e, _) in g.edges() {
            lp.add_row(
                format!("dj{}_{}", j + 1, e.0),
                vec![(w[j][e.0], 1.0), (b[j][e.0], 1.0)],
                Sense::Le,
                1.0,
            );
            lp.add_row(
                format!("sp{}_{}", j + 1, e.0),
                vec![(spare[e.0], 1.0), (b[j][e.0], -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    SbppModel { lp, w, b, zw, zb, spare }
}

/// Lazy rows `spare_e >= sum over J of (w_jl + b_je - 1)`: a failure of `l`
/// moves every connection in `J` that works on `l` and backs up on `e`.
///
/// Fractional points also get the path rows of every working and backup flow.
struct SpareRows<'m> {
    graph: &'m Graph,
    demands: &'m [Demand],
    model: &'m SbppModel,
    issued: BTreeSet<(usize, usize, Vec<usize>)>,
    paths: PathRows,
}

const MAX_CUTS_PER_ROUND: usize = 200;

impl Separator<f64> for SpareRows<'_> {
    fn separate(&mut self, x: &[f64], integral: bool) -> Vec<Cut<f64>> {
        let m = self.model;
        let mut cuts = Vec::new();
        if !integral {
            let none = vec![Vec::new(); self.graph.num_nodes()];
            for (j, d) in self.demands.iter().enumerate() {
                for links in [&m.w[j], &m.b[j]] {
                    cuts.extend(self.paths.separate(self.graph, x, links, &none, Some((d.s, d.t))));
                }
            }
        }
        let edges = m.spare.len();
        let mut found: Vec<(f64, usize, usize, Vec<usize>)> = Vec::new();
        for e in 0..edges {
            for l in (0..edges).filter(|&l| l != e) {
                let set: Vec<usize> = (0..m.w.len())
                    .filter(|&j| x[m.w[j][l].0] + x[m.b[j][e].0] > 1.0 + 1e-6)
                    .collect();
                if set.len() < 2 {
                    continue;
                }
                let lhs: f64 = set.iter().map(|&j| x[m.w[j][l].0] + x[m.b[j][e].0] - 1.0).sum();
                let violation = lhs - x[m.spare[e].0];
                if violation > 1e-6 {
                    found.push((violation, e, l, set));
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut spare_cuts = 0;
        for (_, e, l, set) in found {
            if spare_cuts == MAX_CUTS_PER_ROUND {
                break;
            }
            if !self.issued.insert((e, l, set.clone())) {
                continue;
            }
            let mut terms = vec![(m.spare[e], 1.0)];
            for &j in &set {
                terms.push((m.w[j][l], -1.0));
                terms.push((m.b[j][e], -1.0));
            }
            spare_cuts += 1;
            cuts.push(Cut {
                terms,
                sense: Sense::Ge,
                rhs: -(set.len() as f64),
            });
        }
        cuts
    }
}

fn start_point(g: &Graph, m: &SbppModel, working: &[Route], backup: &[Route]) -> Incumbent<f64> {
    let mut x = vec![0.0; m.lp.num_vars()];
    for (j, (wr, br)) in working.iter().zip(backup).enumerate() {
        for (route, flow, parity) in [(wr, &m.w[j], &m.zw[j]), (br, &m.b[j], &m.zb[j])] {
            for e in &route.edges {
                x[flow[e.0].0] = 1.0;
            }
            for v in &route.nodes[1..route.nodes.len() - 1] {
                x[parity[v.0].0] = 1.0;
            }
        }
    }
    for (e, s) in spare_capacity(g, working, backup).into_iter().enumerate() {
        x[m.spare[e].0] = s as f64;
    }
    Incumbent {
        objective: m.lp.objective_value(&x),
        values: x,
    }
}

/// Exact within `options.time_budget`, started from a sharing-aware
/// rerouting of the dedicated pairs.
pub fn baseline_sbpp(g: &Graph, demands: &[Demand], options: &SolveOptions) -> Result<ProvisionSolution, ProvisionError> {
    check_demands(g, demands)?;
    let (working, backup) = sharing_start(g, demands)?;
    let model = sbpp_model(g, demands);
    let start = start_point(g, &model, &working, &backup);
    let mip = MipOptions {
        time_limit: options.time_budget,
        ..MipOptions::default()
    };
    let mut rows = SpareRows {
        graph: g,
        demands,
        model: &model,
        issued: BTreeSet::new(),
        paths: PathRows::default(),
    };
    let out = solve(&model.lp, &mip, Some(start), &mut rows);
    let inc = out.incumbent.as_ref().ok_or(ProvisionError::NoSolution)?;
    let decode = |flow: &Vec<VarId>, d: &Demand| -> Result<Route, ProvisionError> {
        let edges: Vec<EdgeId> = (0..flow.len()).filter(|&e| inc.values[flow[e].0] > 0.5).map(EdgeId).collect();
        let trail = euler_trail(g, &edges, d.s);
        if trail.last() != d.t {
            return Err(ProvisionError::Decode("SBPP path does not reach its sink".into()));
        }
        Ok(remove_loops(trail))
    };
    let mut working = Vec::new();
    let mut groups = Vec::new();
    for (j, d) in demands.iter().enumerate() {
        working.push(decode(&model.w[j], d)?);
        groups.push(GroupSpec {
            walk: decode(&model.b[j], d)?,
            reverse: None,
            members: vec![j],
        });
    }
    let backups: Vec<Route> = groups.iter().map(|k| k.walk.clone()).collect();
    let spare = spare_capacity(g, &working, &backups);
    let optimality = match out.status {
        MipStatus::Optimal => Optimality::ProvedOptimal,
        _ => Optimality::BoundGap {
            lower_bound: out.bound.unwrap_or(f64::NEG_INFINITY),
        },
    };
    let provisioning = Provisioning {
        demands: demands.to_vec(),
        working,
        groups,
    };
    let mut solution = ProvisionSolution::new(g, Scheme::Sbpp, provisioning, optimality, Some(spare))?;
    solution.stats = SolveStats {
        subproblems: 1,
        pruned: 0,
        nodes: out.nodes,
        cuts: out.cuts,
    };
    Ok(solution)
}
