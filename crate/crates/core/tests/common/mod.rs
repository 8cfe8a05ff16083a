//! Exhaustive provisioning oracle for tiny instances and a seeded generator
//! of small two-connected graphs.
#![allow(dead_code)]

use ncprotect::topology::{Demand, Graph, NodeId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_WALK_LEN: usize = 8;

/// Every simple path from `s` to `t` as a link bitmask with its cost.
pub fn simple_paths(g: &Graph, s: NodeId, t: NodeId) -> Vec<(u64, f64)> {
    fn go(g: &Graph, v: NodeId, t: NodeId, seen: &mut Vec<bool>, mask: u64, cost: f64, out: &mut Vec<(u64, f64)>) {
        if v == t {
            out.push((mask, cost));
            return;
        }
        for &(e, w) in g.incident(v) {
            if !seen[w.0] {
                seen[w.0] = true;
                go(g, w, t, seen, mask | 1 << e.0, cost + g.edge(e).cost, out);
                seen[w.0] = false;
            }
        }
    }
    let mut seen = vec![false; g.num_nodes()];
    seen[s.0] = true;
    let mut out = Vec::new();
    go(g, s, t, &mut seen, 0, 0.0, &mut out);
    out
}

/// Cheapest pair of link-disjoint simple paths by enumeration.
pub fn cheapest_pair(g: &Graph, d: Demand) -> f64 {
    let paths = simple_paths(g, d.s, d.t);
    let mut best = f64::INFINITY;
    for (i, a) in paths.iter().enumerate() {
        for b in &paths[i + 1..] {
            if a.0 & b.0 == 0 {
                best = best.min(a.1 + b.1);
            }
        }
    }
    best
}

/// Cheapest trail avoiding `banned`, at most [`MAX_WALK_LEN`] links, that
/// starts and ends at distinct nodes of `ends` and visits all of them.
pub fn cheapest_walk(g: &Graph, ends: &[NodeId], banned: u64, bound: f64) -> f64 {
    struct Search<'a> {
        g: &'a Graph,
        ends: &'a [NodeId],
        banned: u64,
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, start: NodeId, v: NodeId, used: u64, len: usize, cost: f64, seen: u32) {
            if cost >= self.best {
                return;
            }
            let all = (1u32 << self.ends.len()) - 1;
            if seen == all && v != start && self.ends.contains(&v) {
                self.best = cost;
                return;
            }
            if len == MAX_WALK_LEN {
                return;
            }
            for &(e, w) in self.g.incident(v) {
                let bit = 1u64 << e.0;
                if (used | self.banned) & bit != 0 {
                    continue;
                }
                let mark = self.ends.iter().position(|&x| x == w).map_or(0, |i| 1 << i);
                self.go(start, w, used | bit, len + 1, cost + self.g.edge(e).cost, seen | mark);
            }
        }
    }
    let mut search = Search {
        g,
        ends,
        banned,
        best: bound,
    };
    for (i, &s) in ends.iter().enumerate() {
        search.go(s, s, 0, 0, 0.0, 1 << i);
    }
    search.best
}

/// Optimal 1+N cost for one or two demands by exhaustive search.
pub fn brute_force(g: &Graph, demands: &[Demand]) -> f64 {
    assert!(g.num_edges() <= 64 && (1..=2).contains(&demands.len()));
    let separate: f64 = demands.iter().map(|&d| cheapest_pair(g, d)).sum();
    if demands.len() == 1 {
        return separate;
    }
    let mut ends: Vec<NodeId> = demands.iter().flat_map(|d| [d.s, d.t]).collect();
    ends.sort();
    ends.dedup();
    let first = simple_paths(g, demands[0].s, demands[0].t);
    let second = simple_paths(g, demands[1].s, demands[1].t);
    let mut best = separate;
    for a in &first {
        for b in &second {
            if a.0 & b.0 != 0 || a.1 + b.1 >= best {
                continue;
            }
            let walk = cheapest_walk(g, &ends, a.0 | b.0, best - a.1 - b.1);
            best = best.min(a.1 + b.1 + walk);
        }
    }
    best
}

/// A Hamiltonian cycle over a shuffled node order plus `chords` random
/// extra links, with integer costs in `1..=max_cost`.
pub fn random_two_connected(rng: &mut ChaCha8Rng, nodes: usize, chords: usize, max_cost: u32) -> Graph {
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    for i in 0..nodes {
        let (a, b) = (order[i], order[(i + 1) % nodes]);
        present.insert((a.min(b), a.max(b)));
        edges.push((a, b, rng.gen_range(1..=max_cost) as f64));
    }
    let mut tries = 0;
    while edges.len() < nodes + chords && tries < 100 {
        tries += 1;
        let a = rng.gen_range(0..nodes);
        let b = rng.gen_range(0..nodes);
        if a != b && present.insert((a.min(b), a.max(b))) {
            edges.push((a, b, rng.gen_range(1..=max_cost) as f64));
        }
    }
    Graph::with_edges(nodes, &edges)
}

/// `count` demands with distinct endpoint pairs.
pub fn random_demands(rng: &mut ChaCha8Rng, nodes: usize, count: usize) -> Vec<Demand> {
    let mut out: Vec<Demand> = Vec::new();
    while out.len() < count {
        let s = rng.gen_range(0..nodes);
        let t = rng.gen_range(0..nodes);
        let d = Demand {
            s: NodeId(s.min(t)),
            t: NodeId(s.max(t)),
        };
        if s != t && !out.contains(&d) {
            out.push(d);
        }
    }
    out
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
