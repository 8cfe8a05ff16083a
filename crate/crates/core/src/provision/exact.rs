//! Exact 1+N provisioning.
//!
//! An optimum partitions the connections into groups, and a group's cost is
//! the optimum of its one-walk program. Subsets are priced by increasing
//! size: a subset only has to beat the best split of it into smaller groups,
//! which bounds its branch and bound from above, and it is skipped outright
//! when a routing bound already reaches that split.

use std::time::Instant;

use milp::{solve, Incumbent, MipOptions, MipStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::heuristic::best_plan;
use super::model::build_group_model;
use super::{
    check_demands, disjoint_pair, Optimality, ProvisionError, ProvisionModel, ProvisionSolution, Scheme, SolveOptions,
    SolveStats,
};
use crate::topology::{shortest_path, Demand, GroupSpec, Graph, Provisioning, Route};

const TOL: f64 = 1e-6;

/// Heuristic routings tried for each group's starting incumbent.
const START_ATTEMPTS: usize = 16;

/// Subsets are enumerated exhaustively, so the demand count stays small.
pub const EXACT_DEMAND_LIMIT: usize = 12;

#[derive(Clone, Debug)]
struct GroupPlan {
    working: Vec<Route>,
    walk: Route,
    cost: f64,
}

#[derive(Clone, Copy, Debug)]
enum Choice {
    Group,
    Split(usize),
}

struct Priced {
    plan: Option<GroupPlan>,
    lower: f64,
    nodes: usize,
    cuts: usize,
}

fn members_of(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|b| mask >> b & 1 == 1).collect()
}

fn plan_cost(g: &Graph, working: &[Route], walk: &Route) -> f64 {
    working.iter().map(|r| r.cost(g)).sum::<f64>() + walk.cost(g)
}

fn price(
    g: &Graph,
    demands: &[Demand],
    mask: usize,
    cutoff: f64,
    floor: f64,
    deadline: Option<Instant>,
) -> Result<Priced, ProvisionError> {
    let skipped = Priced {
        plan: None,
        lower: floor.min(cutoff),
        nodes: 0,
        cuts: 0,
    };
    let now = Instant::now();
    if deadline.is_some_and(|d| now >= d) {
        return Ok(skipped);
    }
    let members = members_of(mask);
    let model = build_group_model(g, demands, &members)?;
    let options = MipOptions {
        time_limit: deadline.map(|d| d.saturating_duration_since(now)),
        cutoff: cutoff.is_finite().then_some(cutoff),
        ..MipOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mask as u64);
    let start = best_plan(g, demands, &members, START_ATTEMPTS, &mut rng)
        .filter(|plan| plan.cost < cutoff - TOL)
        .and_then(|plan| model.encode(&plan.working, &plan.walk))
        .map(|values| Incumbent {
            objective: model.lp.objective_value(&values),
            values,
        });
    let out = solve(&model.lp, &options, start, &mut model.separator());
    let bound = out.bound.unwrap_or(floor);
    let plan = match &out.incumbent {
        Some(inc) => {
            let (working, groups) = model.decode(&inc.values)?;
            let walk = groups
                .into_iter()
                .next()
                .ok_or_else(|| ProvisionError::Decode("group program opened no protection path".into()))?
                .walk;
            let cost = plan_cost(g, &working, &walk);
            Some(GroupPlan { working, walk, cost })
        }
        None => None,
    };
    let lower = match out.status {
        MipStatus::Optimal => plan.as_ref().map_or(cutoff, |p| p.cost),
        MipStatus::Infeasible => cutoff,
        MipStatus::Feasible | MipStatus::NoSolution | MipStatus::Unbounded => bound.min(cutoff).max(floor),
    };
    Ok(Priced {
        plan,
        lower,
        nodes: out.nodes,
        cuts: out.cuts,
    })
}

/// Proves optimality within `options.time_budget` or reports the gap.
pub fn solve_exact(model: &ProvisionModel, options: &SolveOptions) -> Result<ProvisionSolution, ProvisionError> {
    let g = model.graph();
    let demands: Vec<Demand> = model.demands().to_vec();
    check_demands(g, &demands)?;
    let n = demands.len();
    if n > EXACT_DEMAND_LIMIT {
        return Err(ProvisionError::TooManyDemands {
            count: n,
            limit: EXACT_DEMAND_LIMIT,
        });
    }
    let deadline = options.time_budget.map(|b| Instant::now() + b);
    let mut pair_cost = Vec::with_capacity(n);
    let mut path_cost = Vec::with_capacity(n);
    let full = (1usize << n) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    let mut lower = vec![f64::INFINITY; full + 1];
    let mut choice = vec![Choice::Group; full + 1];
    let mut plans: Vec<Option<GroupPlan>> = vec![None; full + 1];
    for (c, d) in demands.iter().enumerate() {
        let (a, b) = disjoint_pair(g, c, *d)?;
        let cost = a.cost(g) + b.cost(g);
        pair_cost.push(cost);
        let sp = shortest_path(g, d.s, d.t, |e| Some(g.edge(e).cost)).expect("pair exists");
        path_cost.push(sp.cost(g));
        best[1 << c] = cost;
        lower[1 << c] = cost;
        plans[1 << c] = Some(GroupPlan {
            working: vec![a],
            walk: b,
            cost,
        });
    }

    let mut stats = SolveStats::default();
    for size in 2..=n {
        let layer: Vec<usize> = (1..=full).filter(|m| m.count_ones() as usize == size).collect();
        let mut work = Vec::new();
        for &mask in &layer {
            let low = mask & mask.wrapping_neg();
            let mut sub = (mask - 1) & mask;
            while sub > 0 {
                if sub & low != 0 {
                    let rest = mask ^ sub;
                    let split = best[sub] + best[rest];
                    if split < best[mask] {
                        best[mask] = split;
                        choice[mask] = Choice::Split(sub);
                    }
                    lower[mask] = lower[mask].min(lower[sub] + lower[rest]);
                }
                sub = (sub - 1) & mask;
            }
            let members = members_of(mask);
            let total_path: f64 = members.iter().map(|&j| path_cost[j]).sum();
            let floor = members
                .iter()
                .map(|&j| pair_cost[j] + total_path - path_cost[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if floor >= best[mask] - TOL {
                stats.pruned += 1;
                lower[mask] = lower[mask].min(floor);
            } else {
                work.push((mask, best[mask], floor));
            }
        }
        let priced: Vec<Result<Priced, ProvisionError>> = options.install(|| {
            work.par_iter()
                .map(|&(mask, cutoff, floor)| price(g, &demands, mask, cutoff, floor, deadline))
                .collect()
        })?;
        for (&(mask, _, _), result) in work.iter().zip(priced) {
            let p = result?;
            stats.subproblems += 1;
            stats.nodes += p.nodes;
            stats.cuts += p.cuts;
            lower[mask] = lower[mask].min(p.lower);
            if let Some(plan) = p.plan {
                if plan.cost < best[mask] - TOL {
                    best[mask] = plan.cost;
                    choice[mask] = Choice::Group;
                    plans[mask] = Some(plan);
                }
            }
        }
    }

    if !best[full].is_finite() {
        return Err(ProvisionError::NoSolution);
    }
    let mut working: Vec<Option<Route>> = vec![None; n];
    let mut groups = Vec::new();
    let mut stack = vec![full];
    while let Some(mask) = stack.pop() {
        match choice[mask] {
            Choice::Split(sub) => stack.extend([sub, mask ^ sub]),
            Choice::Group => {
                let plan = plans[mask].clone().expect("priced group has a plan");
                let members = members_of(mask);
                for (&j, r) in members.iter().zip(plan.working) {
                    working[j] = Some(r);
                }
                groups.push(GroupSpec {
                    walk: plan.walk,
                    reverse: None,
                    members,
                });
            }
        }
    }
    groups.sort_by_key(|k| k.members[0]);
    let provisioning = Provisioning {
        demands,
        working: working.into_iter().map(|r| r.expect("every connection is routed")).collect(),
        groups,
    };
    let optimality = if lower[full] >= best[full] - TOL {
        Optimality::ProvedOptimal
    } else {
        Optimality::BoundGap {
            lower_bound: lower[full],
        }
    };
    let mut solution = ProvisionSolution::new(g, Scheme::OnePlusN, provisioning, optimality, None)?;
    solution.stats = stats;
    Ok(solution)
}

/// Solves the full model in one branch and bound; meant for cross-checking
/// [`solve_exact`] on small instances.
pub fn solve_monolithic(model: &ProvisionModel, options: &SolveOptions) -> Result<ProvisionSolution, ProvisionError> {
    let g = model.graph();
    let demands = model.demands().to_vec();
    check_demands(g, &demands)?;
    let mip = MipOptions {
        time_limit: options.time_budget,
        ..MipOptions::default()
    };
    let out = solve(&model.lp, &mip, None, &mut model.separator());
    let Some(inc) = &out.incumbent else {
        for (c, d) in demands.iter().enumerate() {
            disjoint_pair(g, c, *d)?;
        }
        return Err(ProvisionError::NoSolution);
    };
    let (local, groups) = model.decode(&inc.values)?;
    let mut working = vec![Route::default(); demands.len()];
    for (j, r) in local.into_iter().enumerate() {
        working[model.conn(j)] = r;
    }
    let optimality = match out.status {
        MipStatus::Optimal => Optimality::ProvedOptimal,
        _ => Optimality::BoundGap {
            lower_bound: out.bound.unwrap_or(f64::NEG_INFINITY),
        },
    };
    let provisioning = Provisioning {
        demands,
        working,
        groups,
    };
    let mut solution = ProvisionSolution::new(g, Scheme::OnePlusN, provisioning, optimality, None)?;
    solution.stats = SolveStats {
        subproblems: 1,
        pruned: 0,
        nodes: out.nodes,
        cuts: out.cuts,
    };
    Ok(solution)
}
