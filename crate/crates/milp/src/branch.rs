//! Best-first branch and bound with depth-first dives and lazy rows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::problem::{LinearProgram, Sense, VarId, VarKind};
use crate::scalar::{scalar_from_f64, LpScalar};
use crate::simplex::{DualSimplex, LpStatus};

#[derive(Clone, Debug)]
pub struct MipOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Separation rounds on a fractional root solution.
    pub root_cut_rounds: usize,
    /// Separation rounds on a fractional solution below the root.
    pub node_cut_rounds: usize,
    /// Only solutions with objective strictly below this value are sought.
    /// With a cutoff, `Infeasible` means no solution beats it.
    pub cutoff: Option<f64>,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            time_limit: None,
            node_limit: None,
            root_cut_rounds: 50,
            node_cut_rounds: 4,
            cutoff: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cut<T> {
    pub terms: Vec<(VarId, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// Supplies rows that are valid for every integer solution but omitted from
/// the initial model. Called with `integral == true` the separator must
/// return a violated row whenever the point is infeasible.
pub trait Separator<T> {
    fn separate(&mut self, values: &[T], integral: bool) -> Vec<Cut<T>>;
}

pub struct NoCuts;

impl<T> Separator<T> for NoCuts {
    fn separate(&mut self, _values: &[T], _integral: bool) -> Vec<Cut<T>> {
        Vec::new()
    }
}

#[derive(Clone, Debug)]
pub struct Incumbent<T> {
    pub objective: T,
    pub values: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    /// Search tree exhausted; the incumbent is optimal.
    Optimal,
    /// Budget exhausted with an incumbent.
    Feasible,
    Infeasible,
    Unbounded,
    /// Budget exhausted before any solution was found.
    NoSolution,
}

#[derive(Clone, Debug)]
pub struct MipOutcome<T> {
    pub status: MipStatus,
    pub incumbent: Option<Incumbent<T>>,
    /// Proven lower bound on the optimum.
    pub bound: Option<T>,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub cuts: usize,
}

impl<T: LpScalar> MipOutcome<T> {
    pub fn objective(&self) -> Option<&T> {
        self.incumbent.as_ref().map(|i| &i.objective)
    }
}

struct Node<T> {
    changes: Vec<(usize, T, Option<T>)>,
    estimate: T,
    depth: usize,
}

struct Queued<T>(Node<T>);

impl<T: LpScalar> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: LpScalar> Eq for Queued<T> {}

impl<T: LpScalar> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: LpScalar> Ord for Queued<T> {
    // Max-heap: smaller estimate first, deeper node on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .estimate
            .partial_cmp(&self.0.estimate)
            .unwrap_or(Ordering::Equal)
            .then(self.0.depth.cmp(&other.0.depth))
    }
}

pub fn solve<T: LpScalar>(
    lp: &LinearProgram<T>,
    options: &MipOptions,
    start: Option<Incumbent<T>>,
    separator: &mut dyn Separator<T>,
) -> MipOutcome<T> {
    let started = Instant::now();
    let integral_objective = lp.has_integral_objective();
    let int_vars: Vec<usize> = (0..lp.num_vars())
        .filter(|&j| lp.vars[j].kind == VarKind::Integer)
        .collect();
    let root_bounds: Vec<(T, Option<T>)> = lp
        .vars
        .iter()
        .map(|v| (v.lower.clone(), v.upper.clone()))
        .collect();
    let mut current = root_bounds.clone();
    let mut simplex = DualSimplex::new(lp);
    let mut incumbent = start;
    let mut cuts = 0usize;
    let mut nodes = 0usize;
    let mut heap: BinaryHeap<Queued<T>> = BinaryHeap::new();
    let mut lost: Option<T> = None;
    let mut dive: Option<Node<T>> = Some(Node {
        changes: Vec::new(),
        estimate: T::from_i64_lossless(i64::MIN / 4),
        depth: 0,
    });
    let mut exhausted = false;

    let cutoff: Option<T> = options.cutoff.map(scalar_from_f64);
    let prunes = |bound: &T, incumbent: &Option<Incumbent<T>>| -> bool {
        let threshold = match (incumbent, &cutoff) {
            (Some(inc), Some(c)) if *c < inc.objective => c.clone(),
            (Some(inc), _) => inc.objective.clone(),
            (None, Some(c)) => c.clone(),
            (None, None) => return false,
        };
        let tol = T::integrality_tolerance();
        if integral_objective {
            (bound.clone() - tol).ceil() >= threshold
        } else {
            bound.clone() >= threshold - tol
        }
    };

    while let Some(node) = dive.take().or_else(|| heap.pop().map(|q| q.0)) {
        let over_time = options
            .time_limit
            .is_some_and(|limit| started.elapsed() >= limit);
        let over_nodes = options.node_limit.is_some_and(|limit| nodes >= limit);
        if over_time || over_nodes {
            heap.push(Queued(node));
            exhausted = true;
            break;
        }
        if prunes(&node.estimate, &incumbent) {
            continue;
        }
        nodes += 1;

        let mut desired = root_bounds.clone();
        for (j, lo, hi) in &node.changes {
            desired[*j] = (lo.clone(), hi.clone());
        }
        for &j in &int_vars {
            if desired[j] != current[j] {
                simplex.set_bounds(VarId(j), desired[j].0.clone(), desired[j].1.clone());
                current[j] = desired[j].clone();
            }
        }

        let mut rounds = 0usize;
        let max_rounds = if node.depth == 0 {
            options.root_cut_rounds
        } else {
            options.node_cut_rounds
        };
        let outcome = loop {
            match simplex.solve() {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => break None,
                LpStatus::Unbounded => {
                    if node.depth == 0 {
                        return MipOutcome {
                            status: MipStatus::Unbounded,
                            incumbent: None,
                            bound: None,
                            nodes,
                            lp_iterations: simplex.iterations(),
                            cuts,
                        };
                    }
                    break None;
                }
                LpStatus::IterationLimit => {
                    lost = Some(match lost {
                        Some(l) if l <= node.estimate => l,
                        _ => node.estimate.clone(),
                    });
                    break None;
                }
            }
            let objective = simplex.objective();
            if prunes(&objective, &incumbent) {
                break None;
            }
            let values = simplex.primal_values();
            let integral = int_vars.iter().all(|&j| values[j].is_integral());
            if integral || rounds < max_rounds {
                let new_cuts = separator.separate(&values, integral);
                if !new_cuts.is_empty() {
                    for cut in &new_cuts {
                        simplex.add_row(&cut.terms, cut.sense, cut.rhs.clone());
                    }
                    cuts += new_cuts.len();
                    rounds += 1;
                    continue;
                }
            }
            break Some((objective, values, integral));
        };
        let Some((objective, values, integral)) = outcome else {
            continue;
        };

        if integral {
            let mut rounded = values;
            for &j in &int_vars {
                rounded[j] = rounded[j].round_to_integer();
            }
            let obj = lp.objective_value(&rounded);
            let better = incumbent
                .as_ref()
                .is_none_or(|inc| obj < inc.objective);
            if better {
                incumbent = Some(Incumbent {
                    objective: obj,
                    values: rounded,
                });
            }
            continue;
        }

        let branch = int_vars
            .iter()
            .copied()
            .filter(|&j| !values[j].is_integral())
            .min_by(|&a, &b| {
                let ca = lp.vars[a].branch_class;
                let cb = lp.vars[b].branch_class;
                ca.cmp(&cb)
                    .then_with(|| {
                        values[b]
                            .fractionality()
                            .partial_cmp(&values[a].fractionality())
                            .unwrap_or(Ordering::Equal)
                    })
                    .then(a.cmp(&b))
            })
            .expect("fractional variable exists");
        let v = values[branch].clone();
        let (lo, hi) = current[branch].clone();
        let floor = v.floor();
        let ceil = v.ceil();
        let estimate = if integral_objective {
            (objective.clone() - T::integrality_tolerance()).ceil()
        } else {
            objective.clone()
        };
        let mut down = node.changes.clone();
        down.push((branch, lo, Some(floor.clone())));
        let mut up = node.changes;
        up.push((branch, ceil.clone(), hi));
        let down = Node {
            changes: down,
            estimate: estimate.clone(),
            depth: node.depth + 1,
        };
        let up = Node {
            changes: up,
            estimate,
            depth: node.depth + 1,
        };
        let up_first = v - floor >= ceil - values[branch].clone();
        let (first, second) = if up_first { (up, down) } else { (down, up) };
        heap.push(Queued(second));
        dive = Some(first);
    }

    let open_bound = heap
        .iter()
        .map(|q| q.0.estimate.clone())
        .chain(lost.clone())
        .fold(None, |m: Option<T>, x| match m {
            Some(m) if m <= x => Some(m),
            _ => Some(x),
        });
    let bound = match (&incumbent, open_bound) {
        (Some(inc), Some(b)) => Some(if b < inc.objective { b } else { inc.objective.clone() }),
        (Some(inc), None) => Some(inc.objective.clone()),
        (None, b) => b,
    };
    let status = match (&incumbent, exhausted || lost.is_some()) {
        (Some(_), false) => MipStatus::Optimal,
        (Some(_), true) => MipStatus::Feasible,
        (None, false) => MipStatus::Infeasible,
        (None, true) => MipStatus::NoSolution,
    };
    MipOutcome {
        status,
        incumbent,
        bound,
        nodes,
        lp_iterations: simplex.iterations(),
        cuts,
    }
}
