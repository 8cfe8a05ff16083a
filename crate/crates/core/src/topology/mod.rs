//! Undirected network graphs, traffic demands and the routes laid on them.
//!
//! Text formats are line based; `#` starts a comment.
//!
//! ```text
//! node <id> [label]
//! edge <u> <v> <cost>
//! ```
//!
//! Traffic files hold one `conn <s> <t>` line per demand. Node ids in files
//! are arbitrary non-negative integers; internally nodes are numbered densely
//! in declaration order.

mod group;
mod paths;

pub use group::{
    enumerate_group, validate_provisioning, Enumeration, GroupSpec, Label, Provisioning, Side,
    Violation,
};
pub use paths::{edge_connectivity, shortest_path, suurballe, MaxFlow};
pub(crate) use paths::remove_loops;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: node {id} declared twice")]
    DuplicateNode { line: usize, id: u64 },
    #[error("line {line}: unknown node {id}")]
    UnknownNode { line: usize, id: u64 },
    #[error("line {line}: self-loop at node {id}")]
    SelfLoop { line: usize, id: u64 },
    #[error("nodes {from} and {to} are not adjacent")]
    NotAdjacent { from: u64, to: u64 },
    #[error("route is empty")]
    EmptyRoute,
    #[error("protection walk {walk}: {message}")]
    Enumeration { walk: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub external: u64,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub cost: f64,
}

impl Edge {
    pub fn other(&self, v: NodeId) -> NodeId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: NodeId) -> bool {
        self.a == v || self.b == v
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(skip)]
    adjacency: Vec<Vec<(EdgeId, NodeId)>>,
    #[serde(skip)]
    by_external: BTreeMap<u64, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Graph on nodes `0..n` with the given weighted edges.
    pub fn with_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut g = Graph::new();
        for i in 0..n {
            g.add_node(i as u64, None).expect("fresh id");
        }
        for &(a, b, c) in edges {
            g.add_edge(NodeId(a), NodeId(b), c);
        }
        g
    }

    pub fn add_node(&mut self, external: u64, label: Option<String>) -> Option<NodeId> {
        if self.by_external.contains_key(&external) {
            return None;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { external, label });
        self.adjacency.push(Vec::new());
        self.by_external.insert(external, id);
        Some(id)
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId, cost: f64) -> EdgeId {
        let id = EdgeId(self.edges.len());
        self.edges.push(Edge { a, b, cost });
        self.adjacency[a.0].push((id, b));
        self.adjacency[b.0].push((id, a));
        id
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v.0]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().map(|(i, e)| (EdgeId(i), e))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Incident `(edge, neighbour)` pairs in insertion order.
    pub fn incident(&self, v: NodeId) -> &[(EdgeId, NodeId)] {
        &self.adjacency[v.0]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v.0].len()
    }

    pub fn lookup(&self, external: u64) -> Option<NodeId> {
        self.by_external.get(&external).copied()
    }

    pub fn external(&self, v: NodeId) -> u64 {
        self.nodes[v.0].external
    }

    /// Cheapest edge joining `a` and `b` that is not in `skip`.
    pub fn edge_between(&self, a: NodeId, b: NodeId, skip: &[EdgeId]) -> Option<EdgeId> {
        self.adjacency[a.0]
            .iter()
            .filter(|(e, n)| *n == b && !skip.contains(e))
            .min_by(|x, y| {
                self.edges[x.0 .0]
                    .cost
                    .total_cmp(&self.edges[y.0 .0].cost)
                    .then(x.0.cmp(&y.0))
            })
            .map(|(e, _)| *e)
    }

    pub fn cost_of(&self, edges: &[EdgeId]) -> f64 {
        edges.iter().map(|e| self.edges[e.0].cost).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(_, w) in &self.adjacency[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    fn rebuild_index(&mut self) {
        self.adjacency = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            self.adjacency[e.a.0].push((EdgeId(i), e.b));
            self.adjacency[e.b.0].push((EdgeId(i), e.a));
        }
        self.by_external = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.external, NodeId(i)))
            .collect();
    }

    /// Restores lookup tables after deserialisation.
    pub fn reindexed(mut self) -> Self {
        self.rebuild_index();
        self
    }
}

/// Splits a line into tokens, dropping comments. Returns `None` for blank
/// lines.
pub(crate) fn tokens(line: &str) -> Option<Vec<&str>> {
    let body = line.split('#').next().unwrap_or("");
    let toks: Vec<&str> = body.split_whitespace().collect();
    (!toks.is_empty()).then_some(toks)
}

pub(crate) fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, TopologyError> {
    tok.parse().map_err(|_| TopologyError::Parse {
        line,
        message: format!("bad {what} '{tok}'"),
    })
}

pub(crate) fn parse_node(g: &Graph, tok: &str, line: usize) -> Result<NodeId, TopologyError> {
    let id: u64 = parse_num(tok, line, "node id")?;
    g.lookup(id).ok_or(TopologyError::UnknownNode { line, id })
}

pub fn load_graph(text: &str) -> Result<Graph, TopologyError> {
    let mut g = Graph::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let Some(tok) = tokens(raw) else { continue };
        match tok[0] {
            "node" => {
                if tok.len() < 2 {
                    return Err(TopologyError::Parse {
                        line,
                        message: "node needs an id".into(),
                    });
                }
                let id: u64 = parse_num(tok[1], line, "node id")?;
                let label = (tok.len() > 2).then(|| tok[2..].join(" "));
                if g.add_node(id, label).is_none() {
                    return Err(TopologyError::DuplicateNode { line, id });
                }
            }
            "edge" => {
                if tok.len() != 4 {
                    return Err(TopologyError::Parse {
                        line,
                        message: "expected 'edge <u> <v> <cost>'".into(),
                    });
                }
                let a = parse_node(&g, tok[1], line)?;
                let b = parse_node(&g, tok[2], line)?;
                if a == b {
                    return Err(TopologyError::SelfLoop {
                        line,
                        id: g.external(a),
                    });
                }
                let cost: f64 = parse_num(tok[3], line, "cost")?;
                if !cost.is_finite() || cost < 0.0 {
                    return Err(TopologyError::Parse {
                        line,
                        message: format!("cost {cost} must be finite and non-negative"),
                    });
                }
                g.add_edge(a, b, cost);
            }
            other => {
                return Err(TopologyError::Parse {
                    line,
                    message: format!("unknown directive '{other}'"),
                })
            }
        }
    }
    Ok(g)
}

/// Serialises a graph back into the text format.
pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    for n in &g.nodes {
        match &n.label {
            Some(l) => out.push_str(&format!("node {} {}\n", n.external, l)),
            None => out.push_str(&format!("node {}\n", n.external)),
        }
    }
    for e in &g.edges {
        out.push_str(&format!(
            "edge {} {} {}\n",
            g.external(e.a),
            g.external(e.b),
            e.cost
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Demand {
    pub s: NodeId,
    pub t: NodeId,
}

pub fn load_traffic(g: &Graph, text: &str) -> Result<Vec<Demand>, TopologyError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let Some(tok) = tokens(raw) else { continue };
        if tok[0] != "conn" || tok.len() != 3 {
            return Err(TopologyError::Parse {
                line,
                message: "expected 'conn <s> <t>'".into(),
            });
        }
        let s = parse_node(g, tok[1], line)?;
        let t = parse_node(g, tok[2], line)?;
        if s == t {
            return Err(TopologyError::SelfLoop {
                line,
                id: g.external(s),
            });
        }
        out.push(Demand { s, t });
    }
    Ok(out)
}

/// Sequence of nodes and the edges joining consecutive ones. Used both for
/// simple working paths and for protection walks, which may revisit nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Route {
    /// Builds a route through `nodes`, taking the cheapest edge between each
    /// consecutive pair that the route has not used yet.
    pub fn from_nodes(g: &Graph, nodes: &[NodeId]) -> Result<Route, TopologyError> {
        if nodes.is_empty() {
            return Err(TopologyError::EmptyRoute);
        }
        let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            let e = g
                .edge_between(w[0], w[1], &edges)
                .or_else(|| g.edge_between(w[0], w[1], &[]))
                .ok_or(TopologyError::NotAdjacent {
                    from: g.external(w[0]),
                    to: g.external(w[1]),
                })?;
            edges.push(e);
        }
        Ok(Route {
            nodes: nodes.to_vec(),
            edges,
        })
    }

    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().expect("routes are non-empty")
    }

    pub fn reversed(&self) -> Route {
        Route {
            nodes: self.nodes.iter().rev().copied().collect(),
            edges: self.edges.iter().rev().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn cost(&self, g: &Graph) -> f64 {
        g.cost_of(&self.edges)
    }

    /// Consistent with the graph and with no edge used twice.
    pub fn is_trail(&self, g: &Graph) -> bool {
        if self.nodes.len() != self.edges.len() + 1 {
            return false;
        }
        let mut seen = std::collections::BTreeSet::new();
        self.edges.iter().zip(self.nodes.windows(2)).all(|(e, w)| {
            let edge = g.edge(*e);
            seen.insert(*e) && edge.touches(w[0]) && edge.other(w[0]) == w[1]
        })
    }

    pub fn is_simple_path(&self, g: &Graph) -> bool {
        let distinct: std::collections::BTreeSet<_> = self.nodes.iter().collect();
        distinct.len() == self.nodes.len() && self.is_trail(g)
    }

    pub fn display(&self, g: &Graph) -> String {
        self.nodes
            .iter()
            .map(|v| g.external(*v).to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
