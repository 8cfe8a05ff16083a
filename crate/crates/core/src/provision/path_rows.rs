//! Rows valid for every link set that is one path or trail plus even-degree
//! leftovers, separated at fractional points.

use std::collections::BTreeSet;

use milp::{Cut, Sense, VarId};

use crate::topology::{Graph, MaxFlow, NodeId};

/// Each issued row is remembered so a round never repeats one.
#[derive(Default)]
pub(crate) struct PathRows {
    issued: BTreeSet<Vec<(usize, i64)>>,
}

impl PathRows {
    fn row(&mut self, terms: Vec<(usize, i64)>, rhs: i64) -> Option<Cut<f64>> {
        let mut key = terms.clone();
        key.push((usize::MAX, rhs));
        self.issued.insert(key).then(|| Cut {
            terms: terms.into_iter().map(|(v, c)| (VarId(v), c as f64)).collect(),
            sense: Sense::Ge,
            rhs: rhs as f64,
        })
    }

    /// Violated rows for one flow over `links`. A link used at a node other
    /// than the flow's `ends` is matched by another link or a terminal arc in
    /// `extra` there; with `ends`, every cut between them is crossed once.
    pub(crate) fn separate(
        &mut self,
        g: &Graph,
        x: &[f64],
        links: &[VarId],
        extra: &[Vec<VarId>],
        ends: Option<(NodeId, NodeId)>,
    ) -> Vec<Cut<f64>> {
        let mut out = Vec::new();
        for v in g.node_ids() {
            if ends.is_some_and(|(s, t)| v == s || v == t) {
                continue;
            }
            let around: f64 = g.incident(v).iter().map(|(e, _)| x[links[e.0].0]).sum::<f64>()
                + extra[v.0].iter().map(|a| x[a.0]).sum::<f64>();
            for &(e, _) in g.incident(v) {
                if around - 2.0 * x[links[e.0].0] < -1e-6 {
                    let mut terms: Vec<(usize, i64)> = g
                        .incident(v)
                        .iter()
                        .map(|(k, _)| (links[k.0].0, if *k == e { -1 } else { 1 }))
                        .chain(extra[v.0].iter().map(|a| (a.0, 1)))
                        .collect();
                    terms.sort_unstable();
                    out.extend(self.row(terms, 0));
                }
            }
        }
        if let Some((s, t)) = ends {
            let mut flow = MaxFlow::new(g.num_nodes());
            for (e, edge) in g.edges() {
                let c = x[links[e.0].0];
                if c > 1e-9 {
                    flow.add_undirected(edge.a.0, edge.b.0, c);
                }
            }
            if flow.run(s.0, t.0) < 1.0 - 1e-6 {
                let inside = flow.source_side(s.0);
                let mut terms: Vec<(usize, i64)> = g
                    .edges()
                    .filter(|(_, edge)| inside[edge.a.0] != inside[edge.b.0])
                    .map(|(e, _)| (links[e.0].0, 1))
                    .collect();
                terms.sort_unstable();
                out.extend(self.row(terms, 1));
            }
        }
        out
    }
}
