//! Joint working and protection routing model.
//!
//! Every path variable is a binary per (path, undirected link). A working
//! path and its protection flow have unit degree at both endpoints and even
//! degree elsewhere. A protection path is opened by one terminal arc from the
//! virtual source and closed by one into the virtual sink, both at member
//! endpoints; counting those arcs, its links have even degree everywhere.
//! Parity rows alone admit disconnected link sets, so connectivity is
//! enforced lazily by [`Connectivity`].

use std::collections::BTreeSet;

use milp::{Cut, LinearProgram, Sense, Separator, VarId, VarKind};

use super::path_rows::PathRows;
use super::{euler_trail, ProvisionError};
use crate::topology::{remove_loops, Demand, EdgeId, GroupSpec, Graph, MaxFlow, NodeId, Route};

const CLASS_ASSIGN: u32 = 0;
const CLASS_PROTECT: u32 = 1;
const CLASS_ROUTE: u32 = 2;
const CLASS_PARITY: u32 = 3;

#[derive(Clone, Debug)]
pub struct ProvisionModel {
    pub lp: LinearProgram<f64>,
    graph: Graph,
    demands: Vec<Demand>,
    /// Caller's connection index for each model connection.
    conns: Vec<usize>,
    p: Vec<Vec<VarId>>,
    q: Vec<Vec<VarId>>,
    zp: Vec<Vec<VarId>>,
    zq: Vec<Vec<VarId>>,
    f: Vec<Vec<VarId>>,
    zf: Vec<Vec<VarId>>,
    /// `u[slot][conn]`.
    u: Vec<Vec<VarId>>,
    /// Per slot: (node, arc from the virtual source, arc to the virtual sink).
    terminals: Vec<Vec<(NodeId, VarId, VarId)>>,
}

/// Full model: one protection path slot per connection, assignment free.
pub fn build_model(g: &Graph, demands: &[Demand]) -> Result<ProvisionModel, ProvisionError> {
    let n = demands.len();
    build(g, demands, (0..n).collect(), n, false)
}

/// One protection path shared by exactly the connections in `members`.
pub(crate) fn build_group_model(
    g: &Graph,
    demands: &[Demand],
    members: &[usize],
) -> Result<ProvisionModel, ProvisionError> {
    build(g, demands, members.to_vec(), 1, true)
}

fn int_var(lp: &mut LinearProgram<f64>, name: String, upper: f64, class: u32) -> VarId {
    let v = lp.add_var(name, 0.0, Some(upper), 0.0, VarKind::Integer);
    lp.set_branch_class(v, class);
    v
}

fn binary(lp: &mut LinearProgram<f64>, name: String, cost: f64, class: u32) -> VarId {
    let v = lp.add_binary(name, cost);
    lp.set_branch_class(v, class);
    v
}

fn build(
    g: &Graph,
    all: &[Demand],
    conns: Vec<usize>,
    slots: usize,
    fixed: bool,
) -> Result<ProvisionModel, ProvisionError> {
    if conns.is_empty() {
        return Err(ProvisionError::NoDemands);
    }
    for &c in &conns {
        let d = all[c];
        if d.s.0 >= g.num_nodes() || d.t.0 >= g.num_nodes() || d.s == d.t {
            return Err(ProvisionError::BadDemand { conn: c });
        }
    }
    let demands: Vec<Demand> = conns.iter().map(|&c| all[c]).collect();
    let n = demands.len();
    let edges: Vec<EdgeId> = g.edges().map(|(e, _)| e).collect();
    let nodes: Vec<NodeId> = g.node_ids().collect();
    let ext = |v: NodeId| g.external(v);
    let half_degree = |v: NodeId| (g.degree(v) / 2) as f64;
    let mut lp = LinearProgram::new();

    let mut p: Vec<Vec<VarId>> = Vec::new();
    let mut q: Vec<Vec<VarId>> = Vec::new();
    let mut zp: Vec<Vec<VarId>> = Vec::new();
    let mut zq: Vec<Vec<VarId>> = Vec::new();
    for (j, d) in demands.iter().enumerate() {
        let k = j + 1;
        p.push(edges.iter().map(|e| binary(&mut lp, format!("p{k}_{}", e.0), g.edge(*e).cost, CLASS_ROUTE)).collect());
        q.push(edges.iter().map(|e| binary(&mut lp, format!("q{k}_{}", e.0), 0.0, CLASS_ROUTE)).collect());
        for (zs, tag) in [(&mut zp, "zp"), (&mut zq, "zq")] {
            zs.push(
                nodes
                    .iter()
                    .map(|&v| {
                        let upper = if v == d.s || v == d.t { 0.0 } else { half_degree(v) };
                        int_var(&mut lp, format!("{tag}{k}_{}", ext(v)), upper, CLASS_PARITY)
                    })
                    .collect(),
            );
        }
    }

    let endpoints: BTreeSet<NodeId> = demands.iter().flat_map(|d| [d.s, d.t]).collect();
    let mut f: Vec<Vec<VarId>> = Vec::new();
    let mut zf: Vec<Vec<VarId>> = Vec::new();
    let mut u: Vec<Vec<VarId>> = Vec::new();
    let mut terminals: Vec<Vec<(NodeId, VarId, VarId)>> = Vec::new();
    for i in 0..slots {
        let k = n + i + 1;
        f.push(edges.iter().map(|e| binary(&mut lp, format!("f{k}_{}", e.0), g.edge(*e).cost, CLASS_PROTECT)).collect());
        zf.push(
            nodes
                .iter()
                .map(|&v| int_var(&mut lp, format!("zf{k}_{}", ext(v)), half_degree(v) + 1.0, CLASS_PARITY))
                .collect(),
        );
        if !fixed {
            u.push(
                (0..n)
                    .map(|j| {
                        let v = binary(&mut lp, format!("u{k}_{}", j + 1), 0.0, CLASS_ASSIGN);
                        if i > j {
                            // Slots are ordered by their lowest member.
                            lp.vars[v.0].upper = Some(0.0);
                        }
                        v
                    })
                    .collect(),
            );
        }
        terminals.push(
            endpoints
                .iter()
                .map(|&v| {
                    let a = binary(&mut lp, format!("a{k}_{}", ext(v)), 0.0, CLASS_PROTECT);
                    let b = binary(&mut lp, format!("b{k}_{}", ext(v)), 0.0, CLASS_PROTECT);
                    (v, a, b)
                })
                .collect(),
        );
    }

    let incident = |v: NodeId, vars: &[VarId]| -> Vec<(VarId, f64)> {
        g.incident(v).iter().map(|(e, _)| (vars[e.0], 1.0)).collect()
    };
    for (j, d) in demands.iter().enumerate() {
        let k = j + 1;
        for (tag, flow, parity) in [("wk", &p[j], &zp[j]), ("pf", &q[j], &zq[j])] {
            for &v in &nodes {
                let mut terms = incident(v, flow);
                if v == d.s || v == d.t {
                    lp.add_row(format!("{tag}{k}_{}", ext(v)), terms, Sense::Eq, 1.0);
                } else {
                    terms.push((parity[v.0], -2.0));
                    lp.add_row(format!("{tag}{k}_{}", ext(v)), terms, Sense::Eq, 0.0);
                }
            }
        }
        for &e in &edges {
            lp.add_row(format!("dj{k}_{}", e.0), vec![(p[j][e.0], 1.0), (q[j][e.0], 1.0)], Sense::Le, 1.0);
        }
        if !fixed {
            let assign = (0..slots).map(|i| (u[i][j], 1.0)).collect();
            lp.add_row(format!("as{k}"), assign, Sense::Eq, 1.0);
        }
    }

    for i in 0..slots {
        let k = n + i + 1;
        let opened: Vec<(VarId, f64)> = terminals[i].iter().map(|&(_, a, _)| (a, 1.0)).collect();
        lp.add_row(format!("src{k}"), opened.clone(), Sense::Le, 1.0);
        let mut balance: Vec<(VarId, f64)> = terminals[i].iter().map(|&(_, _, b)| (b, 1.0)).collect();
        balance.extend(opened.iter().map(|&(a, _)| (a, -1.0)));
        lp.add_row(format!("snk{k}"), balance, Sense::Eq, 0.0);
        for &v in &nodes {
            let mut terms = incident(v, &f[i]);
            if let Some(&(_, a, b)) = terminals[i].iter().find(|t| t.0 == v) {
                terms.push((a, 1.0));
                terms.push((b, 1.0));
            }
            terms.push((zf[i][v.0], -2.0));
            lp.add_row(format!("pp{k}_{}", ext(v)), terms, Sense::Eq, 0.0);
        }
        // With a fixed assignment every U is 1 and moves to the right-hand side.
        let assigned = |j: usize| -> Vec<(VarId, f64)> { if fixed { Vec::new() } else { vec![(u[i][j], 1.0)] } };
        let fixed_u = if fixed { 1.0 } else { 0.0 };
        if fixed {
            let terms = opened.iter().map(|&(a, _)| (a, 1.0)).collect();
            lp.add_row(format!("on{k}"), terms, Sense::Ge, 1.0);
        } else {
            for j in 0..n {
                let mut terms = assigned(j);
                terms.extend(opened.iter().map(|&(a, _)| (a, -1.0)));
                lp.add_row(format!("on{k}_{}", j + 1), terms, Sense::Le, 0.0);
            }
            for &(v, a, b) in &terminals[i] {
                let owners: Vec<usize> = (0..n).filter(|&j| demands[j].s == v || demands[j].t == v).collect();
                for (arc, tag) in [(a, "ta"), (b, "tb")] {
                    let mut terms = vec![(arc, 1.0)];
                    terms.extend(owners.iter().map(|&j| (u[i][j], -1.0)));
                    lp.add_row(format!("{tag}{k}_{}", ext(v)), terms, Sense::Le, 0.0);
                }
            }
        }
        for j in 0..n {
            for &e in &edges {
                let (fe, pe, qe) = (f[i][e.0], p[j][e.0], q[j][e.0]);
                let mut terms = vec![(fe, 1.0), (qe, -1.0)];
                terms.extend(assigned(j).into_iter().map(|(v, c)| (v, -c)));
                lp.add_row(format!("ln{k}_{}_{}", j + 1, e.0), terms, Sense::Ge, -1.0 + fixed_u);
                let mut terms = vec![(pe, 1.0), (fe, 1.0)];
                terms.extend(assigned(j));
                lp.add_row(format!("wp{k}_{}_{}", j + 1, e.0), terms, Sense::Le, 2.0 - fixed_u);
            }
        }
        for j in 0..n {
            for l in j + 1..n {
                for &e in &edges {
                    let mut terms = vec![(p[j][e.0], 1.0), (p[l][e.0], 1.0)];
                    terms.extend(assigned(j));
                    terms.extend(assigned(l));
                    lp.add_row(format!("ww{k}_{}_{}_{}", j + 1, l + 1, e.0), terms, Sense::Le, 3.0 - 2.0 * fixed_u);
                }
            }
        }
        if !fixed && i > 0 {
            let mut terms = opened.clone();
            terms.extend(terminals[i - 1].iter().map(|&(_, a, _)| (a, -1.0)));
            lp.add_row(format!("ord{k}"), terms, Sense::Le, 0.0);
        }
    }

    Ok(ProvisionModel {
        lp,
        graph: g.clone(),
        demands,
        conns,
        p,
        q,
        zp,
        zq,
        f,
        zf,
        u,
        terminals,
    })
}

impl ProvisionModel {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn num_connections(&self) -> usize {
        self.demands.len()
    }

    pub fn path_slots(&self) -> usize {
        self.f.len()
    }

    /// Path, parity and assignment variables; equals 3N|V| + 3N|E| + N² for
    /// the full model.
    pub fn core_variable_count(&self) -> usize {
        let count = |x: &Vec<Vec<VarId>>| x.iter().map(Vec::len).sum::<usize>();
        count(&self.p) + count(&self.q) + count(&self.zp) + count(&self.zq) + count(&self.f) + count(&self.zf) + count(&self.u)
    }

    /// Terminal arcs from the virtual source and into the virtual sink.
    pub fn terminal_variable_count(&self) -> usize {
        2 * self.terminals.iter().map(Vec::len).sum::<usize>()
    }

    pub(crate) fn separator(&self) -> Connectivity<'_> {
        Connectivity {
            model: self,
            issued: BTreeSet::new(),
            rows: PathRows::default(),
        }
    }

    /// Working paths (model order) and protection groups encoded by an
    /// integer point. Cycles off the working paths and walk tails beyond
    /// the outermost member endpoints are dropped.
    pub(crate) fn decode(&self, x: &[f64]) -> Result<(Vec<Route>, Vec<GroupSpec>), ProvisionError> {
        let g = &self.graph;
        let chosen = |vars: &[VarId]| -> Vec<EdgeId> {
            vars.iter().enumerate().filter(|(_, v)| x[v.0] > 0.5).map(|(e, _)| EdgeId(e)).collect()
        };
        let mut working = Vec::new();
        for (j, d) in self.demands.iter().enumerate() {
            let trail = euler_trail(g, &chosen(&self.p[j]), d.s);
            if trail.last() != d.t {
                return Err(ProvisionError::Decode(format!("working flow of C{} does not reach its sink", self.conns[j] + 1)));
            }
            working.push(remove_loops(trail));
        }
        let mut groups = Vec::new();
        for i in 0..self.path_slots() {
            let start = self.terminals[i].iter().find(|t| x[t.1 .0] > 0.5).map(|t| t.0);
            let Some(start) = start else { continue };
            let members: Vec<usize> = (0..self.num_connections())
                .filter(|&j| self.u.is_empty() || x[self.u[i][j].0] > 0.5)
                .collect();
            let ends: BTreeSet<NodeId> = members.iter().flat_map(|&j| [self.demands[j].s, self.demands[j].t]).collect();
            let walk = open_walk(g, euler_trail(g, &chosen(&self.f[i]), start), &ends);
            if walk.is_empty() {
                return Err(ProvisionError::Decode(format!("protection path {} is empty", i + 1)));
            }
            groups.push(GroupSpec {
                walk,
                reverse: None,
                members: members.iter().map(|&j| self.conns[j]).collect(),
            });
        }
        Ok((working, groups))
    }

    /// Integer point of a group model routing its members over `working`
    /// (model order) and protected by the trail `walk`; `None` if the routes
    /// break a model row.
    pub(crate) fn encode(&self, working: &[Route], walk: &Route) -> Option<Vec<f64>> {
        if self.path_slots() != 1 || !self.u.is_empty() || walk.is_empty() {
            return None;
        }
        let mut x = vec![0.0; self.lp.num_vars()];
        let path = |route: &Route, flow: &[VarId], parity: &[VarId], x: &mut Vec<f64>| {
            for e in &route.edges {
                x[flow[e.0].0] = 1.0;
            }
            for v in &route.nodes[1..route.nodes.len() - 1] {
                x[parity[v.0].0] = 1.0;
            }
        };
        for (j, d) in self.demands.iter().enumerate() {
            path(&working[j], &self.p[j], &self.zp[j], &mut x);
            let at = |v: NodeId| walk.nodes.iter().position(|&w| w == v);
            let (a, b) = (at(d.s)?, at(d.t)?);
            let (lo, hi) = (a.min(b), a.max(b));
            let mut segment = Route {
                nodes: walk.nodes[lo..=hi].to_vec(),
                edges: walk.edges[lo..hi].to_vec(),
            };
            if a > b {
                segment = segment.reversed();
            }
            path(&remove_loops(segment), &self.q[j], &self.zq[j], &mut x);
        }
        let mut degree = vec![0usize; self.graph.num_nodes()];
        for e in &walk.edges {
            x[self.f[0][e.0].0] = 1.0;
            degree[self.graph.edge(*e).a.0] += 1;
            degree[self.graph.edge(*e).b.0] += 1;
        }
        for &(v, a, b) in &self.terminals[0] {
            if v == walk.first() {
                x[a.0] = 1.0;
                degree[v.0] += 1;
            }
            if v == walk.last() {
                x[b.0] = 1.0;
                degree[v.0] += 1;
            }
        }
        for (v, d) in degree.iter().enumerate() {
            x[self.zf[0][v].0] = (d / 2) as f64;
        }
        (self.lp.max_violation(&x) <= 1e-9).then_some(x)
    }

    /// Caller's index of model connection `j`.
    pub(crate) fn conn(&self, j: usize) -> usize {
        self.conns[j]
    }
}

/// Opens a closed trail at its costliest link and trims both tails back to
/// the outermost nodes in `ends`.
fn open_walk(g: &Graph, mut walk: Route, ends: &BTreeSet<NodeId>) -> Route {
    loop {
        while !walk.is_empty() && !ends.contains(&walk.first()) {
            walk.nodes.remove(0);
            walk.edges.remove(0);
        }
        while !walk.is_empty() && !ends.contains(&walk.last()) {
            walk.nodes.pop();
            walk.edges.pop();
        }
        if walk.is_empty() || walk.first() != walk.last() {
            return walk;
        }
        let k = (0..walk.edges.len())
            .max_by(|&a, &b| {
                let (ca, cb) = (g.edge(walk.edges[a]).cost, g.edge(walk.edges[b]).cost);
                ca.total_cmp(&cb).then(b.cmp(&a))
            })
            .expect("closed walk has a link");
        let m = walk.edges.len();
        let nodes = walk.nodes[k + 1..=m].iter().chain(&walk.nodes[1..=k]).copied().collect();
        let edges = walk.edges[k + 1..].iter().chain(&walk.edges[..k]).copied().collect();
        walk = Route { nodes, edges };
    }
}

/// What a connectivity row asks of a node set `S` through the links leaving
/// it plus the terminal arcs inside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Demanded {
    /// Twice the use of a link with an end in `S`.
    Link(EdgeId),
    /// Twice the assignment of the connection owning an endpoint in `S`.
    Assigned(VarId),
    /// A constant 2: `S` holds an endpoint of a fixed member.
    Member,
}

/// Lazy rows making each protection path one trail between its terminal
/// arcs. The path closed through the virtual terminals is a circuit, so any
/// node set it enters is left again: links leaving `S` plus terminal arcs
/// inside `S` number at least two whenever `S` holds a used link or an
/// endpoint of a member.
///
/// At fractional points it also issues rows that hold for every path-shaped
/// flow: each working and protection flow crosses every cut between its
/// endpoints, and a flow entering a node other than its endpoints leaves it.
pub(crate) struct Connectivity<'m> {
    model: &'m ProvisionModel,
    issued: BTreeSet<(usize, Demanded, Vec<bool>)>,
    rows: PathRows,
}

impl Connectivity<'_> {
    fn cut(&mut self, slot: usize, inside: Vec<bool>, demanded: Demanded) -> Option<Cut<f64>> {
        let m = self.model;
        let mut coef = vec![0.0; m.lp.num_vars()];
        for (e, edge) in m.graph.edges() {
            if inside[edge.a.0] != inside[edge.b.0] {
                coef[m.f[slot][e.0].0] += 1.0;
            }
        }
        for &(v, a, b) in &m.terminals[slot] {
            if inside[v.0] {
                coef[a.0] += 1.0;
                coef[b.0] += 1.0;
            }
        }
        let rhs = match demanded {
            Demanded::Link(e) => {
                coef[m.f[slot][e.0].0] -= 2.0;
                0.0
            }
            Demanded::Assigned(u) => {
                coef[u.0] -= 2.0;
                0.0
            }
            Demanded::Member => 2.0,
        };
        if !self.issued.insert((slot, demanded, inside)) {
            return None;
        }
        let terms = coef
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(v, c)| (VarId(v), *c))
            .collect();
        Some(Cut {
            terms,
            sense: Sense::Ge,
            rhs,
        })
    }

    fn integral(&mut self, slot: usize, x: &[f64]) -> Vec<Cut<f64>> {
        let m = self.model;
        let g = &m.graph;
        let n = g.num_nodes();
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(comp: &mut [usize], v: usize) -> usize {
            let mut r = v;
            while comp[r] != r {
                r = comp[r];
            }
            comp[v] = r;
            r
        }
        let used: Vec<EdgeId> = g.edges().map(|(e, _)| e).filter(|e| x[m.f[slot][e.0].0] > 0.5).collect();
        for &e in &used {
            let (a, b) = (find(&mut comp, g.edge(e).a.0), find(&mut comp, g.edge(e).b.0));
            comp[a] = b;
        }
        let mut anchored = vec![false; n];
        for &(v, a, b) in &m.terminals[slot] {
            if x[a.0] + x[b.0] > 0.5 {
                let r = find(&mut comp, v.0);
                anchored[r] = true;
            }
        }
        let mut out = Vec::new();
        let mut done = vec![false; n];
        for &e in &used {
            let r = find(&mut comp, g.edge(e).a.0);
            if anchored[r] || done[r] {
                continue;
            }
            done[r] = true;
            let inside: Vec<bool> = (0..n).map(|v| find(&mut comp, v) == r).collect();
            out.extend(self.cut(slot, inside, Demanded::Link(e)));
        }
        out
    }

    /// Minimum cuts between single nodes and the virtual terminals under the
    /// fractional link and arc values.
    fn fractional(&mut self, slot: usize, x: &[f64]) -> Vec<Cut<f64>> {
        let m = self.model;
        let g = &m.graph;
        let n = g.num_nodes();
        let network = || {
            let mut flow = MaxFlow::new(n + 1);
            for (k, edge) in g.edges() {
                let c = x[m.f[slot][k.0].0];
                if c > 1e-9 {
                    flow.add_undirected(edge.a.0, edge.b.0, c);
                }
            }
            for &(v, a, b) in &m.terminals[slot] {
                let c = x[a.0] + x[b.0];
                if c > 1e-9 {
                    flow.add_undirected(v.0, n, c);
                }
            }
            flow
        };
        let mut wanted: Vec<(NodeId, f64, Demanded)> = Vec::new();
        for j in 0..m.num_connections() {
            let (need, demanded) = if m.u.is_empty() {
                (2.0, Demanded::Member)
            } else {
                let u = m.u[slot][j];
                (2.0 * x[u.0], Demanded::Assigned(u))
            };
            if need > 1e-3 {
                let d = m.demands[j];
                wanted.push((d.s, need, demanded));
                wanted.push((d.t, need, demanded));
            }
        }
        for (e, edge) in g.edges() {
            let fe = x[m.f[slot][e.0].0];
            if fe > 1e-3 {
                wanted.push((edge.a, 2.0 * fe, Demanded::Link(e)));
            }
        }
        let mut out = Vec::new();
        for (v, need, demanded) in wanted {
            let mut flow = network();
            if flow.run(v.0, n) < need - 1e-6 {
                let mut inside = flow.source_side(v.0);
                inside.truncate(n);
                out.extend(self.cut(slot, inside, demanded));
            }
        }
        out
    }
}

impl Connectivity<'_> {
    fn flows(&mut self, x: &[f64]) -> Vec<Cut<f64>> {
        let m = self.model;
        let none = vec![Vec::new(); m.graph.num_nodes()];
        let mut out = Vec::new();
        for j in 0..m.num_connections() {
            let d = m.demands[j];
            out.extend(self.rows.separate(&m.graph, x, &m.p[j], &none, Some((d.s, d.t))));
            out.extend(self.rows.separate(&m.graph, x, &m.q[j], &none, Some((d.s, d.t))));
        }
        for slot in 0..m.path_slots() {
            let mut arcs = none.clone();
            for &(v, a, b) in &m.terminals[slot] {
                arcs[v.0].extend([a, b]);
            }
            out.extend(self.rows.separate(&m.graph, x, &m.f[slot], &arcs, None));
        }
        out
    }
}

impl Separator<f64> for Connectivity<'_> {
    fn separate(&mut self, x: &[f64], integral: bool) -> Vec<Cut<f64>> {
        let mut out = Vec::new();
        if !integral {
            out.extend(self.flows(x));
        }
        for slot in 0..self.model.path_slots() {
            if integral {
                out.extend(self.integral(slot, x));
            } else {
                out.extend(self.fractional(slot, x));
            }
        }
        out
    }
}
