//! Static recoverability: which failed connections can rebuild their data
//! from the equations of the protection walks that survive.
//!
//! Under a failure pattern each intact walk `k` yields one equation
//! `sum_l alpha(k, l) x_l = p_k` over the failed connections it protects.
//! An endpoint of failed connection `c` sees only the equations of the
//! walks it sits on, and recovers exactly when every solution of that
//! subsystem agrees on `x_c`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::coding::{structural_rank, CoefficientMatrix, FailurePattern, ProtectionMask, Submatrix};
use crate::galois::{Field, FieldError, Gf};
use crate::topology::{EdgeId, Provisioning};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("coefficients cover {walks} walks and {conns} connections, provisioning has {want_walks} and {want_conns}")]
    Shape {
        walks: usize,
        conns: usize,
        want_walks: usize,
        want_conns: usize,
    },
    #[error("walk P{} protects C{} but has no coefficient for it", .walk + 1, .conn + 1)]
    MissingCoefficient { walk: usize, conn: usize },
    #[error("walk P{} has a coefficient for C{} without protecting it", .walk + 1, .conn + 1)]
    StrayCoefficient { walk: usize, conn: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryEdge {
    pub conn: usize,
    pub walk: usize,
    pub label: Gf,
}

/// Bipartite graph between connections and protection walks, one edge per
/// protection relation, labelled with its coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryGraph {
    pub conns: usize,
    pub walks: usize,
    pub edges: Vec<RecoveryEdge>,
    pub coefficients: CoefficientMatrix,
}

impl RecoveryGraph {
    pub fn from_coefficients(coefficients: CoefficientMatrix) -> Self {
        let mask = &coefficients.mask;
        let edges = (0..mask.conns)
            .flat_map(|l| (0..mask.walks).map(move |k| (l, k)))
            .filter(|&(l, k)| mask.get(k, l))
            .map(|(conn, walk)| RecoveryEdge {
                conn,
                walk,
                label: coefficients.alpha(walk, conn),
            })
            .collect();
        RecoveryGraph {
            conns: mask.conns,
            walks: mask.walks,
            edges,
            coefficients,
        }
    }

    pub fn mask(&self) -> &ProtectionMask {
        &self.coefficients.mask
    }

    pub fn walks_of(&self, conn: usize) -> Vec<usize> {
        self.mask().walks_of(conn)
    }
}

pub fn build_recovery_graph(p: &Provisioning, coeffs: &CoefficientMatrix) -> Result<RecoveryGraph, AnalysisError> {
    let (walks, conns) = (coeffs.matrix.rows, coeffs.matrix.cols);
    if walks != p.groups.len() || conns != p.demands.len() || coeffs.mask.walks != walks || coeffs.mask.conns != conns {
        return Err(AnalysisError::Shape {
            walks,
            conns,
            want_walks: p.groups.len(),
            want_conns: p.demands.len(),
        });
    }
    let want = ProtectionMask::from_provisioning(p);
    for k in 0..walks {
        for l in 0..conns {
            let nonzero = !coeffs.alpha(k, l).is_zero();
            match (want.get(k, l), nonzero) {
                (true, false) => return Err(AnalysisError::MissingCoefficient { walk: k, conn: l }),
                (false, true) => return Err(AnalysisError::StrayCoefficient { walk: k, conn: l }),
                _ => {}
            }
        }
    }
    Ok(RecoveryGraph::from_coefficients(CoefficientMatrix {
        matrix: coeffs.matrix.clone(),
        mask: want,
    }))
}

/// Outcome for one failed connection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnVerdict {
    pub conn: usize,
    pub recoverable: bool,
    /// Recoverable for some nonzero choice of the coefficients.
    pub structurally_recoverable: bool,
    /// Equations: intact walks protecting the connection.
    pub walks: Vec<usize>,
    /// Unknowns: failed connections on those walks, the connection included.
    pub unknowns: Vec<usize>,
}

impl ConnVerdict {
    pub fn system(&self) -> Submatrix {
        Submatrix {
            rows: self.walks.clone(),
            cols: self.unknowns.clone(),
        }
    }

    /// The system with this connection's own column dropped.
    pub fn reduced_system(&self) -> Submatrix {
        Submatrix {
            rows: self.walks.clone(),
            cols: self.unknowns.iter().copied().filter(|&l| l != self.conn).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternVerdict {
    pub pattern: FailurePattern,
    pub connections: Vec<ConnVerdict>,
}

impl PatternVerdict {
    pub fn all_recoverable(&self) -> bool {
        self.connections.iter().all(|c| c.recoverable)
    }

    pub fn verdict(&self, conn: usize) -> Option<&ConnVerdict> {
        self.connections.iter().find(|c| c.conn == conn)
    }
}

/// Equations and unknowns a failed connection's endpoints work with.
pub fn local_system(mask: &ProtectionMask, pattern: &FailurePattern, conn: usize) -> Submatrix {
    let rows: Vec<usize> = mask
        .walks_of(conn)
        .into_iter()
        .filter(|k| !pattern.walks.contains(k))
        .collect();
    let mut cols: BTreeSet<usize> = rows
        .iter()
        .flat_map(|&k| mask.conns_of(k))
        .filter(|l| pattern.connections.contains(l))
        .collect();
    cols.insert(conn);
    Submatrix {
        rows,
        cols: cols.into_iter().collect(),
    }
}

pub fn check_pattern(field: &Field, rg: &RecoveryGraph, pattern: &FailurePattern) -> Result<PatternVerdict, AnalysisError> {
    let mut connections = Vec::with_capacity(pattern.connections.len());
    for &conn in &pattern.connections {
        let system = local_system(rg.mask(), pattern, conn);
        let v = ConnVerdict {
            conn,
            recoverable: false,
            structurally_recoverable: false,
            walks: system.rows,
            unknowns: system.cols,
        };
        let full = rg.coefficients.submatrix(&v.system());
        let reduced = rg.coefficients.submatrix(&v.reduced_system());
        // x_c is pinned down iff its column is independent of the others.
        let recoverable = field.rank(&full)? == field.rank(&reduced)? + 1;
        let structurally_recoverable =
            structural_rank(rg.mask(), &v.system()) == structural_rank(rg.mask(), &v.reduced_system()) + 1;
        connections.push(ConnVerdict {
            recoverable,
            structurally_recoverable,
            ..v
        });
    }
    Ok(PatternVerdict {
        pattern: pattern.clone(),
        connections,
    })
}

pub const DEFAULT_PATTERN_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepResult {
    pub max_failures: usize,
    /// Patterns with between one and `max_failures` failures.
    pub total: u128,
    pub checked: usize,
    pub partial: bool,
    pub failing: Vec<PatternVerdict>,
    /// Coefficient submatrices whose maximal rank makes every structurally
    /// recoverable verdict recoverable.
    pub required: Vec<Submatrix>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub fn pattern_count(conns: usize, walks: usize, max_failures: usize) -> u128 {
    (1..=max_failures)
        .flat_map(|t| (0..=t).map(move |nc| binomial(conns, nc) * binomial(walks, t - nc)))
        .sum()
}

/// Every pattern with `1..=max_failures` failures: by size, then more
/// failed connections first, then lexicographically.
pub fn patterns(conns: usize, walks: usize, max_failures: usize) -> impl Iterator<Item = FailurePattern> {
    (1..=max_failures).flat_map(move |t| {
        (0..=t.min(conns)).rev().flat_map(move |nc| {
            (0..conns).combinations(nc).flat_map(move |cs| {
                (0..walks)
                    .combinations(t - nc)
                    .map(move |ws| FailurePattern::new(cs.iter().copied(), ws))
            })
        })
    })
}

pub fn sweep(field: &Field, rg: &RecoveryGraph, max_failures: usize, cap: usize) -> Result<SweepResult, AnalysisError> {
    const CHUNK: usize = 4096;
    let total = pattern_count(rg.conns, rg.walks, max_failures);
    let mut iter = patterns(rg.conns, rg.walks, max_failures).take(cap).peekable();
    let mut checked = 0;
    let mut failing = Vec::new();
    let mut required = BTreeSet::new();
    while iter.peek().is_some() {
        let chunk: Vec<FailurePattern> = iter.by_ref().take(CHUNK).collect();
        checked += chunk.len();
        let verdicts: Vec<PatternVerdict> = chunk
            .par_iter()
            .map(|p| check_pattern(field, rg, p))
            .collect::<Result<_, _>>()?;
        for v in verdicts {
            for c in v.connections.iter().filter(|c| c.structurally_recoverable) {
                required.insert(c.system());
                let reduced = c.reduced_system();
                if !reduced.cols.is_empty() {
                    required.insert(reduced);
                }
            }
            if !v.all_recoverable() {
                failing.push(v);
            }
        }
    }
    Ok(SweepResult {
        max_failures,
        total,
        checked,
        partial: (checked as u128) < total,
        failing,
        required: required.into_iter().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionViolation {
    TooFewWalks { conn: usize, walks: usize, required: usize },
    SharedLink { conn: usize, a: usize, b: usize, edge: usize },
}

impl fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionViolation::TooFewWalks { conn, walks, required } => write!(
                f,
                "C{} is protected by {walks} walk(s), {required} needed",
                conn + 1
            ),
            ConditionViolation::SharedLink { conn, a, b, edge } => write!(
                f,
                "walks P{} and P{} protecting C{} share link {edge}",
                a + 1,
                b + 1,
                conn + 1
            ),
        }
    }
}

/// Each connection needs `max_failures` pairwise link-disjoint protecting
/// walks. Solvability under every pattern is left to [`sweep`].
pub fn necessary_conditions(p: &Provisioning, max_failures: usize) -> Vec<ConditionViolation> {
    let edges: Vec<BTreeSet<EdgeId>> = p.groups.iter().map(|g| g.walk_edges()).collect();
    let mut out = Vec::new();
    for conn in 0..p.demands.len() {
        let walks = p.protecting(conn);
        if walks.len() < max_failures {
            out.push(ConditionViolation::TooFewWalks {
                conn,
                walks: walks.len(),
                required: max_failures,
            });
        }
        for (i, &a) in walks.iter().enumerate() {
            for &b in &walks[i + 1..] {
                if let Some(e) = edges[a].intersection(&edges[b]).next() {
                    out.push(ConditionViolation::SharedLink { conn, a, b, edge: e.0 });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{assign_all_ones, assign_cauchy, assign_random};
    use proptest::prelude::*;

    /// Six connections, three walks: the first protects 1, 2, 5, the second
    /// 2, 3, 6 and the third 2, 4, 6 (1-based).
    fn three_walk_mask() -> ProtectionMask {
        let mut m = ProtectionMask::empty(3, 6);
        for (k, conns) in [[0, 1, 4], [1, 2, 5], [1, 3, 5]].iter().enumerate() {
            for &l in conns {
                m.set(k, l, true);
            }
        }
        m
    }

    fn graph(seed: u64) -> (Field, RecoveryGraph) {
        let f = Field::gf256();
        let rg = RecoveryGraph::from_coefficients(assign_random(&three_walk_mask(), &f, seed));
        (f, rg)
    }

    #[test]
    fn graph_edges_follow_mask() {
        let (_, rg) = graph(1);
        assert_eq!(rg.edges.len(), 9);
        let c2: Vec<usize> = rg.edges.iter().filter(|e| e.conn == 1).map(|e| e.walk).collect();
        assert_eq!(c2, vec![0, 1, 2]);
        let f = Field::gf256();
        let lone = RecoveryGraph::from_coefficients(assign_all_ones(&ProtectionMask::empty(1, 2), &f));
        assert!(lone.edges.is_empty());
    }

    #[test]
    fn three_connection_failure() {
        let (f, rg) = graph(4);
        let v = check_pattern(&f, &rg, &FailurePattern::new([1, 5, 4], [])).unwrap();
        assert!(v.verdict(1).unwrap().recoverable);
        assert!(v.verdict(5).unwrap().recoverable);
        let c5 = v.verdict(4).unwrap();
        assert!(!c5.recoverable && !c5.structurally_recoverable);
        assert_eq!(c5.walks, vec![0]);
        assert_eq!(c5.unknowns, vec![1, 4]);
    }

    #[test]
    fn walk_and_two_connections() {
        let (f, rg) = graph(4);
        let v = check_pattern(&f, &rg, &FailurePattern::new([1, 5], [1])).unwrap();
        let c2 = v.verdict(1).unwrap();
        assert!(c2.recoverable);
        assert_eq!(c2.walks, vec![0, 2]);
        assert!(!v.verdict(5).unwrap().recoverable);
    }

    #[test]
    fn empty_pattern_is_vacuous() {
        let (f, rg) = graph(2);
        assert!(check_pattern(&f, &rg, &FailurePattern::default()).unwrap().all_recoverable());
    }

    #[test]
    fn all_ones_cannot_separate_two_unknowns() {
        // With equal coefficients both walks give the same equation in the
        // two co-failed connections sharing them.
        let f = Field::gf256();
        let rg = RecoveryGraph::from_coefficients(assign_all_ones(&ProtectionMask::full(2, 2), &f));
        let v = check_pattern(&f, &rg, &FailurePattern::new([0, 1], [])).unwrap();
        assert!(!v.verdict(0).unwrap().recoverable);
        assert!(v.verdict(0).unwrap().structurally_recoverable);
        let rg = RecoveryGraph::from_coefficients(assign_cauchy(&ProtectionMask::full(2, 2), &f).unwrap());
        assert!(check_pattern(&f, &rg, &FailurePattern::new([0, 1], [])).unwrap().all_recoverable());
    }

    #[test]
    fn pattern_enumeration_matches_count() {
        for (n, k, m) in [(6, 3, 2), (4, 3, 3), (3, 0, 2), (2, 2, 5)] {
            let all: Vec<FailurePattern> = patterns(n, k, m).collect();
            assert_eq!(all.len() as u128, pattern_count(n, k, m));
            assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), all.len());
            assert!(all.iter().all(|p| (1..=m).contains(&p.size())));
        }
    }

    #[test]
    fn sweep_reports_structural_failures_only() {
        let (f, rg) = graph(11);
        let r = sweep(&f, &rg, 2, DEFAULT_PATTERN_CAP).unwrap();
        assert!(!r.partial);
        assert_eq!(r.checked as u128, r.total);
        for v in &r.failing {
            for c in v.connections.iter().filter(|c| !c.recoverable) {
                // With generic coefficients only too-few-equations cases fail.
                assert!(!c.structurally_recoverable, "{v:?}");
            }
        }
        // Single connections on one walk fail with that walk.
        assert!(r.failing.iter().any(|v| v.pattern == FailurePattern::new([0], [0])));
    }

    #[test]
    fn sweep_cap_flags_partial() {
        let (f, rg) = graph(1);
        let r = sweep(&f, &rg, 2, 10).unwrap();
        assert!(r.partial);
        assert_eq!(r.checked, 10);
    }

    #[test]
    fn required_submatrices_are_enough() {
        let (f, rg) = graph(5);
        let r = sweep(&f, &rg, 3, DEFAULT_PATTERN_CAP).unwrap();
        let done = crate::coding::complete_matrix(rg.mask(), &r.required, &f, 77, 64).unwrap();
        let rg2 = RecoveryGraph::from_coefficients(done.coefficients);
        for p in patterns(6, 3, 3) {
            for c in check_pattern(&f, &rg2, &p).unwrap().connections {
                assert_eq!(c.recoverable, c.structurally_recoverable, "{p:?}");
            }
        }
    }

    #[test]
    fn necessary_conditions_flag_counts_and_overlaps() {
        use crate::topology::{Demand, GroupSpec, Graph, NodeId, Route};
        let g = Graph::with_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0), (0, 2, 1.0)]);
        let n = |v: usize| NodeId(v);
        let route = |vs: &[usize]| Route::from_nodes(&g, &vs.iter().map(|&v| n(v)).collect::<Vec<_>>()).unwrap();
        let p = Provisioning {
            demands: vec![Demand { s: n(0), t: n(1) }],
            working: vec![route(&[0, 1])],
            groups: vec![
                GroupSpec { walk: route(&[0, 3, 2, 1]), reverse: None, members: vec![0] },
                GroupSpec { walk: route(&[0, 2, 1]), reverse: None, members: vec![0] },
            ],
        };
        assert!(necessary_conditions(&p, 1).iter().any(|v| matches!(v, ConditionViolation::SharedLink { conn: 0, .. })));
        let mut single = p.clone();
        single.groups.pop();
        assert!(necessary_conditions(&single, 1).is_empty());
        assert_eq!(
            necessary_conditions(&single, 2),
            vec![ConditionViolation::TooFewWalks { conn: 0, walks: 1, required: 2 }]
        );
    }

    proptest! {
        #[test]
        fn adding_a_failure_never_helps(seed in any::<u64>(), conns in proptest::collection::btree_set(0usize..6, 0..4),
                                        walks in proptest::collection::btree_set(0usize..3, 0..3),
                                        extra in 0usize..9) {
            let (f, rg) = graph(seed);
            let base = FailurePattern { connections: conns, walks };
            let mut more = base.clone();
            if extra < 6 { more.connections.insert(extra); } else { more.walks.insert(extra - 6); }
            let before = check_pattern(&f, &rg, &base).unwrap();
            let after = check_pattern(&f, &rg, &more).unwrap();
            for c in &before.connections {
                if !c.recoverable {
                    prop_assert!(!after.verdict(c.conn).unwrap().recoverable);
                }
            }
        }
    }
}
