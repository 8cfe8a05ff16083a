use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::{EdgeId, Graph, NodeId, Route};

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64, usize);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra over edges for which `weight` returns a non-negative cost;
/// `None` removes the edge. Ties break toward fewer hops, then lower ids.
pub fn shortest_path(
    g: &Graph,
    s: NodeId,
    t: NodeId,
    weight: impl Fn(EdgeId) -> Option<f64>,
) -> Option<Route> {
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![usize::MAX; n];
    let mut prev: Vec<Option<(EdgeId, NodeId)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s.0] = 0.0;
    hops[s.0] = 0;
    heap.push(Dist(0.0, s.0));
    while let Some(Dist(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if v == t.0 {
            break;
        }
        for &(e, w) in g.incident(NodeId(v)) {
            let Some(c) = weight(e) else { continue };
            let nd = d + c;
            let better = nd < dist[w.0] - 1e-12
                || ((nd - dist[w.0]).abs() <= 1e-12 && hops[v] + 1 < hops[w.0]);
            if better && !done[w.0] {
                dist[w.0] = nd;
                hops[w.0] = hops[v] + 1;
                prev[w.0] = Some((e, NodeId(v)));
                heap.push(Dist(nd, w.0));
            }
        }
    }
    if !dist[t.0].is_finite() {
        return None;
    }
    let mut nodes = vec![t];
    let mut edges = Vec::new();
    let mut cur = t;
    while cur != s {
        let (e, p) = prev[cur.0]?;
        edges.push(e);
        nodes.push(p);
        cur = p;
    }
    nodes.reverse();
    edges.reverse();
    Some(Route { nodes, edges })
}

/// Cheapest pair of edge-disjoint `s`-`t` paths (Suurballe's problem),
/// solved by one Dijkstra run and one Bellman-Ford run on the residual
/// graph with the first path reversed and negated. The cheaper path comes
/// first.
pub fn suurballe(
    g: &Graph,
    s: NodeId,
    t: NodeId,
    weight: impl Fn(EdgeId) -> Option<f64>,
) -> Option<(Route, Route)> {
    let first = shortest_path(g, s, t, &weight)?;
    let mut forward_in_first = vec![None; g.num_edges()];
    for (i, e) in first.edges.iter().enumerate() {
        forward_in_first[e.0] = Some(first.nodes[i]);
    }
    // Arcs: (from, to, cost, edge).
    let mut arcs: Vec<(usize, usize, f64, EdgeId)> = Vec::new();
    for (e, edge) in g.edges() {
        let Some(c) = weight(e) else { continue };
        match forward_in_first[e.0] {
            Some(from) => {
                let to = edge.other(from);
                arcs.push((to.0, from.0, -c, e));
            }
            None => {
                arcs.push((edge.a.0, edge.b.0, c, e));
                arcs.push((edge.b.0, edge.a.0, c, e));
            }
        }
    }
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    dist[s.0] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for (i, &(u, v, c, _)) in arcs.iter().enumerate() {
            if dist[u].is_finite() && dist[u] + c < dist[v] - 1e-9 {
                dist[v] = dist[u] + c;
                pred[v] = Some(i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !dist[t.0].is_finite() {
        return None;
    }
    // Tail node of each link carried by the two-unit flow.
    let mut tail: Vec<Option<NodeId>> = forward_in_first.clone();
    let mut cur = t.0;
    let mut guard = 0;
    while cur != s.0 {
        let i = pred[cur]?;
        let (u, _, _, e) = arcs[i];
        tail[e.0] = match forward_in_first[e.0] {
            Some(_) => None,
            None => Some(NodeId(u)),
        };
        cur = u;
        guard += 1;
        if guard > arcs.len() {
            return None;
        }
    }
    let mut a = extract_path(g, s, t, &mut tail)?;
    let mut b = extract_path(g, s, t, &mut tail)?;
    if (b.cost(g), b.len()) < (a.cost(g), a.len()) {
        std::mem::swap(&mut a, &mut b);
    }
    Some((a, b))
}

/// Follows flow-carrying links out of their tails from `s` to `t`, clearing
/// them, and removes any loops from the resulting trail.
fn extract_path(g: &Graph, s: NodeId, t: NodeId, tail: &mut [Option<NodeId>]) -> Option<Route> {
    let mut nodes = vec![s];
    let mut edges = Vec::new();
    let mut cur = s;
    while cur != t {
        let &(e, w) = g.incident(cur).iter().find(|(e, _)| tail[e.0] == Some(cur))?;
        tail[e.0] = None;
        edges.push(e);
        nodes.push(w);
        cur = w;
    }
    Some(remove_loops(Route { nodes, edges }))
}

/// Shortcuts every revisit so each node appears at most once.
pub(crate) fn remove_loops(route: Route) -> Route {
    let mut nodes: Vec<NodeId> = Vec::new();
    let mut edges: Vec<EdgeId> = Vec::new();
    for (i, &v) in route.nodes.iter().enumerate() {
        if let Some(pos) = nodes.iter().position(|&u| u == v) {
            nodes.truncate(pos + 1);
            edges.truncate(pos);
        } else {
            if i > 0 {
                edges.push(route.edges[i - 1]);
            }
            nodes.push(v);
        }
    }
    Route { nodes, edges }
}

/// Edmonds-Karp maximum flow on an undirected or directed capacity network.
#[derive(Clone, Debug)]
pub struct MaxFlow {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl MaxFlow {
    pub fn new(n: usize) -> Self {
        MaxFlow {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn pair(&mut self, u: usize, v: usize, cu: f64, cv: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cu);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(cv);
    }

    pub fn add_undirected(&mut self, u: usize, v: usize, c: f64) {
        self.pair(u, v, c, c);
    }

    pub fn add_arc(&mut self, u: usize, v: usize, c: f64) {
        self.pair(u, v, c, 0.0);
    }

    pub fn run(&mut self, s: usize, t: usize) -> f64 {
        const EPS: f64 = 1e-12;
        let mut total = 0.0;
        if s == t {
            return f64::INFINITY;
        }
        loop {
            let mut pred: Vec<Option<usize>> = vec![None; self.head.len()];
            let mut queue = VecDeque::from([s]);
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &a in &self.head[u] {
                    let v = self.to[a];
                    if !seen[v] && self.cap[a] > EPS {
                        seen[v] = true;
                        pred[v] = Some(a);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while let Some(a) = pred[v] {
                bottleneck = bottleneck.min(self.cap[a]);
                v = self.to[a ^ 1];
            }
            let mut v = t;
            while let Some(a) = pred[v] {
                self.cap[a] -= bottleneck;
                self.cap[a ^ 1] += bottleneck;
                v = self.to[a ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `s` in the residual network after [`run`].
    ///
    /// [`run`]: MaxFlow::run
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &a in &self.head[u] {
                let v = self.to[a];
                if !seen[v] && self.cap[a] > 1e-12 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Maximum number of pairwise link-disjoint paths between `s` and `t`.
pub fn edge_connectivity(g: &Graph, s: NodeId, t: NodeId) -> usize {
    let mut flow = MaxFlow::new(g.num_nodes());
    for (_, e) in g.edges() {
        flow.add_undirected(e.a.0, e.b.0, 1.0);
    }
    flow.run(s.0, t.0).round() as usize
}
