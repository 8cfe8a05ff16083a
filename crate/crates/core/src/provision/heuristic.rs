//! Greedy group formation for instances beyond the exact solver.
//!
//! Starts from one dedicated pair per connection and repeatedly applies the
//! merge of two groups that saves the most, where a merged group is routed
//! by [`protect_group`]. Restarts reseed the routing choices.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_demands, disjoint_pair, Optimality, ProvisionError, ProvisionSolution, Scheme};
use crate::topology::{shortest_path, suurballe, Demand, EdgeId, GroupSpec, Graph, NodeId, Provisioning, Route};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HeuristicOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Routing attempts per candidate group.
    pub attempts: usize,
    pub max_group: Option<usize>,
}

impl Default for HeuristicOptions {
    fn default() -> Self {
        HeuristicOptions {
            seed: 0,
            restarts: 4,
            attempts: 6,
            max_group: None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub members: Vec<usize>,
    pub working: Vec<Route>,
    pub walk: Route,
    pub cost: f64,
}

/// Working paths (in `members` order) and one walk through every member
/// endpoint, link-disjoint from them; `None` when no attempt finds one.
pub fn protect_group(
    g: &Graph,
    demands: &[Demand],
    members: &[usize],
    seed: u64,
) -> Option<(Vec<Route>, GroupSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = best_plan(g, demands, members, HeuristicOptions::default().attempts, &mut rng)?;
    let spec = GroupSpec {
        walk: plan.walk,
        reverse: None,
        members: plan.members,
    };
    Some((plan.working, spec))
}

pub(crate) fn best_plan(g: &Graph, demands: &[Demand], members: &[usize], attempts: usize, rng: &mut ChaCha8Rng) -> Option<Plan> {
    let mut best: Option<Plan> = None;
    for attempt in 0..attempts.max(1) {
        if let Some(plan) = route_group(g, demands, members, attempt, rng) {
            if best.as_ref().is_none_or(|b| plan.cost < b.cost - TOL) {
                best = Some(plan);
            }
        }
    }
    best
}

fn route_group(g: &Graph, demands: &[Demand], members: &[usize], attempt: usize, rng: &mut ChaCha8Rng) -> Option<Plan> {
    let mut order = members.to_vec();
    if attempt > 0 {
        order.shuffle(rng);
    }
    let mut taken = vec![false; g.num_edges()];
    let mut routed: Vec<(usize, Route)> = Vec::new();
    for &j in &order {
        let d = demands[j];
        let free = |e: EdgeId| (!taken[e.0]).then(|| g.edge(e).cost);
        // Odd attempts keep a disjoint detour available for each member.
        let path = if attempt % 2 == 1 {
            suurballe(g, d.s, d.t, free).map(|(a, _)| a)
        } else {
            shortest_path(g, d.s, d.t, free)
        }?;
        for e in &path.edges {
            taken[e.0] = true;
        }
        routed.push((j, path));
    }
    let ends: BTreeSet<NodeId> = members.iter().flat_map(|&j| [demands[j].s, demands[j].t]).collect();
    let start = if attempt == 0 {
        demands[members[0]].s
    } else {
        *ends.iter().nth(rng.gen_range(0..ends.len()))?
    };
    let mut visited: BTreeSet<NodeId> = [start].into();
    let mut walk = Route {
        nodes: vec![start],
        edges: Vec::new(),
    };
    while visited.len() < ends.len() {
        let cur = walk.last();
        let free = |e: EdgeId| (!taken[e.0]).then(|| g.edge(e).cost);
        let leg = ends
            .iter()
            .filter(|v| !visited.contains(v))
            .filter_map(|&v| shortest_path(g, cur, v, free))
            .min_by(|a, b| a.cost(g).total_cmp(&b.cost(g)).then(a.len().cmp(&b.len())))?;
        for (&e, &v) in leg.edges.iter().zip(&leg.nodes[1..]) {
            taken[e.0] = true;
            walk.edges.push(e);
            walk.nodes.push(v);
            if ends.contains(&v) {
                visited.insert(v);
            }
        }
    }
    routed.sort_by_key(|(j, _)| members.iter().position(|m| m == j));
    let working: Vec<Route> = routed.into_iter().map(|(_, r)| r).collect();
    let cost = working.iter().map(|r| r.cost(g)).sum::<f64>() + walk.cost(g);
    Some(Plan {
        members: members.to_vec(),
        working,
        walk,
        cost,
    })
}

fn merge_run(g: &Graph, demands: &[Demand], start: &[Plan], options: &HeuristicOptions, rng: &mut ChaCha8Rng) -> Vec<Plan> {
    let mut groups = start.to_vec();
    let limit = options.max_group.unwrap_or(usize::MAX);
    loop {
        let mut best: Option<(usize, usize, Plan, f64)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                if groups[a].members.len() + groups[b].members.len() > limit {
                    continue;
                }
                let mut members = groups[a].members.clone();
                members.extend(&groups[b].members);
                members.sort_unstable();
                let Some(plan) = best_plan(g, demands, &members, options.attempts, rng) else {
                    continue;
                };
                let gain = groups[a].cost + groups[b].cost - plan.cost;
                if gain > TOL && best.as_ref().is_none_or(|(_, _, _, g0)| gain > *g0 + TOL) {
                    best = Some((a, b, plan, gain));
                }
            }
        }
        let Some((a, b, plan, _)) = best else {
            return groups;
        };
        groups.remove(b);
        groups[a] = plan;
    }
}

/// Never claims optimality. Connections left in a group of their own are
/// listed in `unshared`.
pub fn solve_heuristic(
    g: &Graph,
    demands: &[Demand],
    options: &HeuristicOptions,
) -> Result<ProvisionSolution, ProvisionError> {
    check_demands(g, demands)?;
    let mut singles = Vec::new();
    for (c, d) in demands.iter().enumerate() {
        let (a, b) = disjoint_pair(g, c, *d)?;
        let cost = a.cost(g) + b.cost(g);
        singles.push(Plan {
            members: vec![c],
            working: vec![a],
            walk: b,
            cost,
        });
    }
    let mut best: Option<(f64, Vec<Plan>)> = None;
    for restart in 0..options.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(restart as u64));
        let groups = merge_run(g, demands, &singles, options, &mut rng);
        let cost: f64 = groups.iter().map(|p| p.cost).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < c - TOL) {
            best = Some((cost, groups));
        }
    }
    let (_, mut groups) = best.expect("at least one restart");
    groups.sort_by_key(|p| p.members[0]);
    let mut working = vec![Route::default(); demands.len()];
    let mut specs = Vec::new();
    let mut unshared = Vec::new();
    for plan in groups {
        for (&j, r) in plan.members.iter().zip(plan.working) {
            working[j] = r;
        }
        if plan.members.len() == 1 {
            unshared.push(plan.members[0]);
        }
        specs.push(GroupSpec {
            walk: plan.walk,
            reverse: None,
            members: plan.members,
        });
    }
    let provisioning = Provisioning {
        demands: demands.to_vec(),
        working,
        groups: specs,
    };
    let mut solution = ProvisionSolution::new(g, Scheme::OnePlusN, provisioning, Optimality::Heuristic, None)?;
    solution.unshared = unshared;
    Ok(solution)
}
