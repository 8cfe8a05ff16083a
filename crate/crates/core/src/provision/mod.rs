//! Joint provisioning of working paths and shared protection walks, plus the
//! dedicated (1+1) and shared backup path (SBPP) baselines.
//!
//! Costs count each link once per path that uses it. Under SBPP a link's
//! protection cost is its cost times the spare units reserved on it.

mod baseline;
mod compare;
mod exact;
mod heuristic;
mod model;
mod path_rows;

pub use baseline::{baseline_one_plus_one, baseline_sbpp};
pub use compare::{compare, random_demands, CompareOptions, CompareRow, Comparison, Instance, SchemeCost};
pub use exact::{solve_exact, solve_monolithic};
pub use heuristic::{protect_group, solve_heuristic, HeuristicOptions};
pub use model::{build_model, ProvisionModel};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{
    suurballe, validate_provisioning, Demand, EdgeId, Graph, MaxFlow, NodeId, Provisioning, Route,
};

#[derive(Debug, Error)]
pub enum ProvisionError {
    #[error("no demands to provision")]
    NoDemands,
    #[error("demand C{} has an endpoint outside the graph or equal endpoints", conn + 1)]
    BadDemand { conn: usize },
    #[error("C{} has no two link-disjoint paths; removing links {cut:?} separates its endpoints", conn + 1)]
    NotTwoConnected { conn: usize, cut: Vec<(u64, u64)> },
    #[error("{count} demands exceed the exact solver's limit of {limit}")]
    TooManyDemands { count: usize, limit: usize },
    #[error("no feasible solution found within the budget")]
    NoSolution,
    #[error("cannot decode solver output: {0}")]
    Decode(String),
    #[error("solution violates provisioning rules: {0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OnePlusN,
    OnePlusOne,
    Sbpp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimality {
    ProvedOptimal,
    Heuristic,
    BoundGap { lower_bound: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Integer programs handed to branch and bound.
    pub subproblems: usize,
    /// Candidate groups skipped because a bound ruled them out.
    pub pruned: usize,
    pub nodes: usize,
    pub cuts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvisionSolution {
    pub scheme: Scheme,
    pub provisioning: Provisioning,
    pub working_cost: f64,
    pub protection_cost: f64,
    pub cost: f64,
    pub optimality: Optimality,
    /// Spare units reserved per link, SBPP only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backup_capacity: Option<Vec<u32>>,
    /// Connections the heuristic could not place in a shared group.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unshared: Vec<usize>,
    pub stats: SolveStats,
}

impl ProvisionSolution {
    /// Validates `provisioning` and prices it under `scheme`.
    pub(crate) fn new(
        g: &Graph,
        scheme: Scheme,
        provisioning: Provisioning,
        optimality: Optimality,
        backup_capacity: Option<Vec<u32>>,
    ) -> Result<Self, ProvisionError> {
        let violations = validate_provisioning(g, &provisioning);
        if let Some(v) = violations.first() {
            return Err(ProvisionError::Invalid(v.to_string()));
        }
        let working_cost = provisioning.working.iter().map(|r| r.cost(g)).sum();
        let protection_cost = match &backup_capacity {
            Some(spare) => g.edges().map(|(e, edge)| edge.cost * spare[e.0] as f64).sum(),
            None => provisioning.groups.iter().map(|k| k.walk.cost(g)).sum(),
        };
        Ok(ProvisionSolution {
            scheme,
            provisioning,
            working_cost,
            protection_cost,
            cost: working_cost + protection_cost,
            optimality,
            backup_capacity,
            unshared: Vec::new(),
            stats: SolveStats::default(),
        })
    }

    pub fn is_optimal(&self) -> bool {
        self.optimality == Optimality::ProvedOptimal
    }

    pub fn lower_bound(&self) -> Option<f64> {
        match self.optimality {
            Optimality::ProvedOptimal => Some(self.cost),
            Optimality::BoundGap { lower_bound } => Some(lower_bound),
            Optimality::Heuristic => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub time_budget: Option<Duration>,
    /// Worker threads; zero uses the global pool.
    pub jobs: usize,
}

impl SolveOptions {
    pub(crate) fn install<R: Send>(&self, run: impl FnOnce() -> R + Send) -> Result<R, ProvisionError> {
        if self.jobs == 0 {
            return Ok(run());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| ProvisionError::Pool(e.to_string()))?;
        Ok(pool.install(run))
    }
}

/// Writes the model in the CPLEX LP text format.
pub fn export_model(model: &ProvisionModel) -> String {
    let title = format!(
        "shared protection provisioning: {} connections, {} nodes, {} links\n\
         core variables {}, terminal arcs {}",
        model.num_connections(),
        model.graph().num_nodes(),
        model.graph().num_edges(),
        model.core_variable_count(),
        model.terminal_variable_count()
    );
    milp::write_lp(&model.lp, &title)
}

pub(crate) fn check_demands(g: &Graph, demands: &[Demand]) -> Result<(), ProvisionError> {
    if demands.is_empty() {
        return Err(ProvisionError::NoDemands);
    }
    for (c, d) in demands.iter().enumerate() {
        if d.s.0 >= g.num_nodes() || d.t.0 >= g.num_nodes() || d.s == d.t {
            return Err(ProvisionError::BadDemand { conn: c });
        }
    }
    Ok(())
}

/// Cheapest link-disjoint pair for demand `conn`, cheaper path first, or the
/// minimum cut proving there is none.
pub(crate) fn disjoint_pair(g: &Graph, conn: usize, d: Demand) -> Result<(Route, Route), ProvisionError> {
    if let Some(pair) = suurballe(g, d.s, d.t, |e| Some(g.edge(e).cost)) {
        return Ok(pair);
    }
    let mut flow = MaxFlow::new(g.num_nodes());
    for (_, e) in g.edges() {
        flow.add_undirected(e.a.0, e.b.0, 1.0);
    }
    flow.run(d.s.0, d.t.0);
    let side = flow.source_side(d.s.0);
    let cut = g
        .edges()
        .filter(|(_, e)| side[e.a.0] != side[e.b.0])
        .map(|(_, e)| (g.external(e.a), g.external(e.b)))
        .collect();
    Err(ProvisionError::NotTwoConnected { conn, cut })
}

/// Hierholzer walk over `edges` from `start`, covering the part connected to
/// it. Links are tried in increasing id order.
pub(crate) fn euler_trail(g: &Graph, edges: &[EdgeId], start: NodeId) -> Route {
    let mut adj: Vec<Vec<(EdgeId, NodeId)>> = vec![Vec::new(); g.num_nodes()];
    let mut sorted = edges.to_vec();
    sorted.sort();
    for &e in &sorted {
        let edge = g.edge(e);
        adj[edge.a.0].push((e, edge.b));
        adj[edge.b.0].push((e, edge.a));
    }
    let mut used = vec![false; g.num_edges()];
    let mut next = vec![0usize; g.num_nodes()];
    let mut stack: Vec<(NodeId, Option<EdgeId>)> = vec![(start, None)];
    let mut out: Vec<(NodeId, Option<EdgeId>)> = Vec::new();
    while let Some(&(v, _)) = stack.last() {
        let list = &adj[v.0];
        while next[v.0] < list.len() && used[list[next[v.0]].0 .0] {
            next[v.0] += 1;
        }
        if let Some(&(e, w)) = list.get(next[v.0]) {
            used[e.0] = true;
            stack.push((w, Some(e)));
        } else {
            out.push(stack.pop().expect("stack is non-empty"));
        }
    }
    out.reverse();
    Route {
        nodes: out.iter().map(|(v, _)| *v).collect(),
        edges: out.iter().filter_map(|(_, e)| *e).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_trail_covers_all_links_between_odd_nodes() {
        // A path 0-1-2 with a triangle hanging off node 1.
        let g = Graph::with_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0), (3, 4, 1.0), (4, 1, 1.0)]);
        let all: Vec<EdgeId> = (0..5).map(EdgeId).collect();
        let t = euler_trail(&g, &all, NodeId(0));
        assert!(t.is_trail(&g));
        assert_eq!(t.len(), 5);
        assert_eq!((t.first(), t.last()), (NodeId(0), NodeId(2)));
    }

    #[test]
    fn missing_pair_reports_a_bridge() {
        let g = Graph::with_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)]);
        let err = disjoint_pair(&g, 0, Demand { s: NodeId(0), t: NodeId(3) }).unwrap_err();
        match err {
            ProvisionError::NotTwoConnected { conn: 0, cut } => assert_eq!(cut, vec![(2, 3)]),
            other => panic!("{other}"),
        }
    }
}
