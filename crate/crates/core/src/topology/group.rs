//! Protection groups: a set of connections sharing one protection walk.
//!
//! Every endpoint of a member connection is a processing point on the walk.
//! Labels are handed out along the walk: an endpoint whose partner is still
//! unlabelled joins the `S` side, otherwise the `T` side. `S` labels count
//! up from 1 and `T` labels count down from the group size, so `S_1` sits
//! at the start of the walk and `T_1` at its end. The `S` signal travels
//! the walk forwards and the `T` signal travels it backwards.
//!
//! Labels belong to connection endpoints rather than nodes, so a node that
//! terminates several member connections hosts several labels at the same
//! processing point.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use super::{Demand, EdgeId, Graph, NodeId, Route, TopologyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    S,
    T,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    /// Connection index in the provisioning.
    pub conn: usize,
    pub side: Side,
    /// 1-based index within the side.
    pub index: usize,
    pub node: NodeId,
    /// Processing position in `Enumeration::walk.nodes`.
    pub forward_pos: usize,
    /// Processing position in `Enumeration::reverse.nodes`.
    pub reverse_pos: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    /// Route of the `S` signal, from `S_1` to `T_1`.
    pub walk: Route,
    /// Route of the `T` signal, from `T_1` to `S_1`.
    pub reverse: Route,
    /// Labels in `S`-direction processing order. The `T` direction visits
    /// them in reverse.
    pub order: Vec<Label>,
}

impl Enumeration {
    pub fn group_size(&self) -> usize {
        self.order.len() / 2
    }

    pub fn position(&self, conn: usize, side: Side) -> Option<usize> {
        self.order.iter().position(|l| l.conn == conn && l.side == side)
    }

    pub fn partner(&self, i: usize) -> usize {
        let l = &self.order[i];
        let other = match l.side {
            Side::S => Side::T,
            Side::T => Side::S,
        };
        self.position(l.conn, other).expect("both endpoints are labelled")
    }

    /// Next label downstream on the `S` signal.
    pub fn sigma(&self, i: usize) -> Option<usize> {
        (i + 1 < self.order.len()).then_some(i + 1)
    }

    /// Next label downstream on the `T` signal.
    pub fn tau(&self, i: usize) -> Option<usize> {
        i.checked_sub(1)
    }

    /// Label `S_k` or `T_k`.
    pub fn find(&self, side: Side, index: usize) -> Option<&Label> {
        self.order.iter().find(|l| l.side == side && l.index == index)
    }

    pub fn name(&self, i: usize) -> String {
        let l = &self.order[i];
        format!("{:?}{}", l.side, l.index)
    }
}

/// Labels the endpoints of `members` along `walk`.
///
/// The walk is oriented so that its lower-id extreme is `S_1`. `reverse`
/// overrides the route of the `T` signal, which otherwise retraces the walk.
pub fn enumerate_group(
    g: &Graph,
    walk_index: usize,
    walk: &Route,
    reverse: Option<&Route>,
    members: &[(usize, Demand)],
) -> Result<Enumeration, TopologyError> {
    let err = |message: String| TopologyError::Enumeration {
        walk: walk_index + 1,
        message,
    };
    if walk.is_empty() {
        return Err(err("walk has no links".into()));
    }
    if walk.first() == walk.last() {
        return Err(err("walk is closed; open it by dropping one link".into()));
    }
    let (fwd, rev) = if g.external(walk.first()) <= g.external(walk.last()) {
        (walk.clone(), reverse.cloned())
    } else {
        match reverse {
            Some(r) => (r.clone(), Some(walk.clone())),
            None => (walk.reversed(), None),
        }
    };
    let rev = rev.unwrap_or_else(|| fwd.reversed());
    if rev.first() != fwd.last() || rev.last() != fwd.first() {
        return Err(err("reverse route must join the walk's extremes in reverse".into()));
    }
    let last = fwd.nodes.len() - 1;

    let mut endpoints: Vec<(usize, usize, Side, NodeId)> = Vec::new();
    for &(conn, d) in members {
        for (side, v) in [(Side::S, d.s), (Side::T, d.t)] {
            let pos = if v == fwd.last() {
                Some(last)
            } else {
                fwd.nodes.iter().position(|&u| u == v)
            };
            let Some(pos) = pos else {
                return Err(err(format!(
                    "endpoint {} of connection C{} is not on the walk",
                    g.external(v),
                    conn + 1
                )));
            };
            endpoints.push((pos, conn, side, v));
        }
    }
    for extreme in [fwd.first(), fwd.last()] {
        if !endpoints.iter().any(|e| e.3 == extreme) {
            return Err(err(format!(
                "walk extreme {} is not a member endpoint",
                g.external(extreme)
            )));
        }
    }
    endpoints.sort();

    let n = members.len();
    let mut labelled: BTreeSet<usize> = BTreeSet::new();
    let mut next_s = 1;
    let mut next_t = n;
    let mut order = Vec::with_capacity(2 * n);
    for (pos, conn, _, node) in endpoints {
        let side = if labelled.insert(conn) {
            next_s += 1;
            (Side::S, next_s - 1)
        } else {
            next_t -= 1;
            (Side::T, next_t + 1)
        };
        order.push(Label {
            conn,
            side: side.0,
            index: side.1,
            node,
            forward_pos: pos,
            reverse_pos: 0,
        });
    }

    let mut cursor = 0;
    for label in order.iter_mut().rev() {
        let found = rev.nodes[cursor..].iter().position(|&u| u == label.node);
        let Some(off) = found else {
            return Err(err(
                "reverse route does not visit the processing nodes in reverse order".into(),
            ));
        };
        cursor += off;
        label.reverse_pos = cursor;
    }

    Ok(Enumeration {
        walk: fwd,
        reverse: rev,
        order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub walk: Route,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<Route>,
    /// Connection indices protected by the walk.
    pub members: Vec<usize>,
}

impl GroupSpec {
    pub fn walk_edges(&self) -> BTreeSet<EdgeId> {
        let mut e: BTreeSet<EdgeId> = self.walk.edges.iter().copied().collect();
        if let Some(r) = &self.reverse {
            e.extend(r.edges.iter().copied());
        }
        e
    }
}

/// Working paths and protection groups laid on a graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provisioning {
    pub demands: Vec<Demand>,
    pub working: Vec<Route>,
    pub groups: Vec<GroupSpec>,
}

impl Provisioning {
    pub fn enumerate(&self, g: &Graph, group: usize) -> Result<Enumeration, TopologyError> {
        let spec = &self.groups[group];
        let members: Vec<(usize, Demand)> = spec.members.iter().map(|&c| (c, self.demands[c])).collect();
        enumerate_group(g, group, &spec.walk, spec.reverse.as_ref(), &members)
    }

    /// Groups whose walk protects connection `conn`.
    pub fn protecting(&self, conn: usize) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&k| self.groups[k].members.contains(&conn))
            .collect()
    }

    pub fn total_cost(&self, g: &Graph) -> f64 {
        self.working.iter().map(|r| r.cost(g)).sum::<f64>()
            + self.groups.iter().map(|k| k.walk.cost(g)).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    WorkingPath { conn: usize },
    WalkRoute { group: usize },
    EndpointOffWalk { group: usize, conn: usize, node: u64 },
    WorkingOverlap { group: usize, a: usize, b: usize, edge: usize },
    WalkOverlapsWorking { group: usize, conn: usize, edge: usize },
    ProtectingWalksOverlap { conn: usize, a: usize, b: usize, edge: usize },
    Unprotected { conn: usize },
    Enumeration { group: usize, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WorkingPath { conn } => {
                write!(f, "working path of C{} is not a path between its endpoints", conn + 1)
            }
            Violation::WalkRoute { group } => write!(f, "walk P{} is not a route in the graph", group + 1),
            Violation::EndpointOffWalk { group, conn, node } => write!(
                f,
                "walk P{} misses node {node} of connection C{}",
                group + 1,
                conn + 1
            ),
            Violation::WorkingOverlap { group, a, b, edge } => write!(
                f,
                "working paths of C{} and C{} share link {edge} inside group P{}",
                a + 1,
                b + 1,
                group + 1
            ),
            Violation::WalkOverlapsWorking { group, conn, edge } => write!(
                f,
                "walk P{} shares link {edge} with the working path of C{}",
                group + 1,
                conn + 1
            ),
            Violation::ProtectingWalksOverlap { conn, a, b, edge } => write!(
                f,
                "walks P{} and P{} both protect C{} but share link {edge}",
                a + 1,
                b + 1,
                conn + 1
            ),
            Violation::Unprotected { conn } => write!(f, "C{} is not protected by any walk", conn + 1),
            Violation::Enumeration { group, message } => write!(f, "P{}: {message}", group + 1),
        }
    }
}

fn consistent(g: &Graph, r: &Route) -> bool {
    !r.nodes.is_empty()
        && r.nodes.len() == r.edges.len() + 1
        && r.edges.iter().zip(r.nodes.windows(2)).all(|(e, w)| {
            let edge = g.edge(*e);
            edge.touches(w[0]) && edge.other(w[0]) == w[1]
        })
}

/// Every violated provisioning rule, in a deterministic order.
pub fn validate_provisioning(g: &Graph, p: &Provisioning) -> Vec<Violation> {
    let mut out = Vec::new();
    for (c, (d, r)) in p.demands.iter().zip(&p.working).enumerate() {
        let ends = r.nodes.first() == Some(&d.s) && r.nodes.last() == Some(&d.t);
        if !ends || !r.is_simple_path(g) {
            out.push(Violation::WorkingPath { conn: c });
        }
    }
    let working_edges: Vec<BTreeSet<EdgeId>> =
        p.working.iter().map(|r| r.edges.iter().copied().collect()).collect();

    for (k, spec) in p.groups.iter().enumerate() {
        let routes_ok = consistent(g, &spec.walk) && spec.reverse.as_ref().is_none_or(|r| consistent(g, r));
        if !routes_ok {
            out.push(Violation::WalkRoute { group: k });
            continue;
        }
        let walk_edges = spec.walk_edges();
        for &c in &spec.members {
            let d = p.demands[c];
            for v in [d.s, d.t] {
                if !spec.walk.nodes.contains(&v) {
                    out.push(Violation::EndpointOffWalk {
                        group: k,
                        conn: c,
                        node: g.external(v),
                    });
                }
            }
            if let Some(e) = working_edges[c].intersection(&walk_edges).next() {
                out.push(Violation::WalkOverlapsWorking {
                    group: k,
                    conn: c,
                    edge: e.0,
                });
            }
        }
        for (i, &a) in spec.members.iter().enumerate() {
            for &b in &spec.members[i + 1..] {
                if let Some(e) = working_edges[a].intersection(&working_edges[b]).next() {
                    out.push(Violation::WorkingOverlap {
                        group: k,
                        a,
                        b,
                        edge: e.0,
                    });
                }
            }
        }
        if let Err(TopologyError::Enumeration { message, .. }) = p.enumerate(g, k) {
            if !out.iter().any(|v| matches!(v, Violation::EndpointOffWalk { group, .. } if *group == k)) {
                out.push(Violation::Enumeration { group: k, message });
            }
        }
    }
    for c in 0..p.demands.len() {
        let walks = p.protecting(c);
        if walks.is_empty() {
            out.push(Violation::Unprotected { conn: c });
        }
        for (i, &a) in walks.iter().enumerate() {
            for &b in &walks[i + 1..] {
                let ea = p.groups[a].walk_edges();
                if let Some(e) = ea.intersection(&p.groups[b].walk_edges()).next() {
                    out.push(Violation::ProtectingWalksOverlap {
                        conn: c,
                        a,
                        b,
                        edge: e.0,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ten nodes in a line carrying five connections whose endpoints are
    /// interleaved along the walk.
    fn five_connection_line() -> (Graph, Vec<(usize, Demand)>, Route) {
        let mut edges: Vec<(usize, usize, f64)> = (0..9).map(|i| (i, i + 1, 1.0)).collect();
        let pairs = [(0, 8), (1, 4), (2, 9), (3, 6), (5, 7)];
        for &(a, b) in &pairs {
            edges.push((a, b, 1.0));
        }
        let g = Graph::with_edges(10, &edges);
        let members = pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (i, Demand { s: NodeId(a), t: NodeId(b) }))
            .collect();
        let walk = Route::from_nodes(&g, &(0..10).map(NodeId).collect::<Vec<_>>()).unwrap();
        (g, members, walk)
    }

    #[test]
    fn labels_follow_walk_order() {
        let (g, members, walk) = five_connection_line();
        let e = enumerate_group(&g, 0, &walk, None, &members).unwrap();
        let names: Vec<String> = (0..10).map(|i| e.name(i)).collect();
        assert_eq!(names, ["S1", "S2", "S3", "S4", "T5", "S5", "T4", "T3", "T2", "T1"]);
        let s1 = e.position(0, Side::S).unwrap();
        assert_eq!(e.name(e.partner(s1)), "T2");
        let s2 = e.position(1, Side::S).unwrap();
        assert_eq!(e.name(e.sigma(s2).unwrap()), "S3");
        let t4 = e.position(3, Side::T).unwrap();
        assert_eq!(e.name(e.tau(t4).unwrap()), "S5");
    }

    #[test]
    fn orientation_puts_lower_id_first() {
        let (g, members, walk) = five_connection_line();
        let e = enumerate_group(&g, 0, &walk.reversed(), None, &members).unwrap();
        assert_eq!(e.walk.first(), NodeId(0));
        assert_eq!(e.order[0].node, NodeId(0));
    }

    #[test]
    fn missing_endpoint_and_dangling_extreme() {
        let (g, members, walk) = five_connection_line();
        let short = Route {
            nodes: walk.nodes[..9].to_vec(),
            edges: walk.edges[..8].to_vec(),
        };
        assert!(matches!(
            enumerate_group(&g, 0, &short, None, &members),
            Err(TopologyError::Enumeration { walk: 1, .. })
        ));
        let trimmed: Vec<(usize, Demand)> = members[1..].to_vec();
        let err = enumerate_group(&g, 0, &walk, None, &trimmed).unwrap_err();
        assert!(err.to_string().contains("extreme"));
    }

    #[test]
    fn shared_node_hosts_two_labels() {
        // C1 = (0, 2) and C2 = (2, 3) meet at node 2.
        let g = Graph::with_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let walk = Route::from_nodes(&g, &[NodeId(0), NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let members = [
            (0, Demand { s: NodeId(0), t: NodeId(2) }),
            (1, Demand { s: NodeId(2), t: NodeId(3) }),
        ];
        let e = enumerate_group(&g, 0, &walk, None, &members).unwrap();
        let names: Vec<String> = (0..4).map(|i| e.name(i)).collect();
        assert_eq!(names, ["S1", "T2", "S2", "T1"]);
    }

    #[test]
    fn validation_flags_overlaps() {
        let (g, members, walk) = five_connection_line();
        let demands: Vec<Demand> = members.iter().map(|m| m.1).collect();
        let working: Vec<Route> = demands
            .iter()
            .map(|d| Route::from_nodes(&g, &[d.s, d.t]).unwrap())
            .collect();
        let mut p = Provisioning {
            demands,
            working,
            groups: vec![GroupSpec {
                walk,
                reverse: None,
                members: (0..5).collect(),
            }],
        };
        assert!(validate_provisioning(&g, &p).is_empty());
        p.working[1] = Route::from_nodes(&g, &[NodeId(1), NodeId(2), NodeId(3), NodeId(4)]).unwrap();
        let v = validate_provisioning(&g, &p);
        assert!(v.iter().any(|x| matches!(x, Violation::WalkOverlapsWorking { conn: 1, .. })));
    }
}
