//! Cost comparison of 1+1, 1+N and SBPP over seeded random demand sets.
//!
//! The extra-cost ratio of a scheme on one instance is
//! `(cost - sbpp_cost) / sbpp_cost`; rows average it over the draws that
//! all three schemes solved.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{baseline_one_plus_one, baseline_sbpp, build_model, solve_exact, ProvisionSolution, SolveOptions};
use crate::topology::{Demand, Graph, NodeId};

#[derive(Clone, Debug)]
pub struct CompareOptions {
    /// Demand counts, one row each.
    pub counts: Vec<usize>,
    pub draws: usize,
    pub seed: u64,
    /// Applied to each exact and SBPP solve separately.
    pub solve: SolveOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeCost {
    pub cost: f64,
    pub optimal: bool,
    /// Proved lower bound when optimality is not proved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
}

impl SchemeCost {
    fn of(s: &ProvisionSolution) -> Self {
        SchemeCost {
            cost: s.cost,
            optimal: s.is_optimal(),
            lower_bound: (!s.is_optimal()).then(|| s.lower_bound()).flatten(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub count: usize,
    pub draw: usize,
    /// Endpoints as external node ids.
    pub demands: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_plus_one: Option<SchemeCost>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_plus_n: Option<SchemeCost>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbpp: Option<SchemeCost>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl Instance {
    fn costs(&self) -> Option<(f64, f64, f64)> {
        Some((self.one_plus_one.as_ref()?.cost, self.one_plus_n.as_ref()?.cost, self.sbpp.as_ref()?.cost))
    }

    pub fn all_optimal(&self) -> bool {
        [&self.one_plus_one, &self.one_plus_n, &self.sbpp]
            .iter()
            .all(|s| s.as_ref().is_some_and(|s| s.optimal))
    }

    /// `sbpp <= 1+N <= 1+1`; only meaningful when all three are optimal.
    pub fn ordered(&self) -> bool {
        self.costs()
            .is_some_and(|(one, n, sbpp)| sbpp <= n + 1e-9 && n <= one + 1e-9)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub count: usize,
    /// Draws where every scheme produced a solution.
    pub solved: usize,
    /// Draws where every scheme proved optimality.
    pub proved: usize,
    /// Proved draws breaking `sbpp <= 1+N <= 1+1`.
    pub order_violations: usize,
    pub mean_one_plus_one: f64,
    pub mean_one_plus_n: f64,
    pub mean_sbpp: f64,
    pub ratio_one_plus_one: f64,
    pub ratio_one_plus_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub instances: Vec<Instance>,
}

/// `count` demands with distinct unordered endpoint pairs, `s < t`.
pub fn random_demands(g: &Graph, count: usize, rng: &mut ChaCha8Rng) -> Vec<Demand> {
    let n = g.num_nodes();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut picked: Vec<usize> = sample(rng, pairs, count.min(pairs)).into_vec();
    picked.sort_unstable();
    let mut all = (0..n).flat_map(|s| (s + 1..n).map(move |t| (s, t)));
    let mut out = Vec::with_capacity(picked.len());
    let mut at = 0;
    for k in picked {
        let (s, t) = all.nth(k - at).expect("index below pair count");
        at = k + 1;
        out.push(Demand { s: NodeId(s), t: NodeId(t) });
    }
    out
}

fn run_instance(g: &Graph, demands: &[Demand], count: usize, draw: usize, options: &SolveOptions) -> Instance {
    let mut errors = Vec::new();
    let mut keep = |r: Result<ProvisionSolution, super::ProvisionError>, scheme: &str| match r {
        Ok(s) => Some(SchemeCost::of(&s)),
        Err(e) => {
            errors.push(format!("{scheme}: {e}"));
            None
        }
    };
    let one_plus_one = keep(baseline_one_plus_one(g, demands), "1+1");
    let one_plus_n = keep(build_model(g, demands).and_then(|m| solve_exact(&m, options)), "1+N");
    let sbpp = keep(baseline_sbpp(g, demands, options), "SBPP");
    Instance {
        count,
        draw,
        demands: demands.iter().map(|d| (g.external(d.s), g.external(d.t))).collect(),
        one_plus_one,
        one_plus_n,
        sbpp,
        errors,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summarize(count: usize, instances: &[Instance]) -> CompareRow {
    let solved: Vec<(f64, f64, f64)> = instances.iter().filter_map(Instance::costs).collect();
    let proved: Vec<&Instance> = instances.iter().filter(|i| i.all_optimal()).collect();
    CompareRow {
        count,
        solved: solved.len(),
        proved: proved.len(),
        order_violations: proved.iter().filter(|i| !i.ordered()).count(),
        mean_one_plus_one: mean(solved.iter().map(|c| c.0)),
        mean_one_plus_n: mean(solved.iter().map(|c| c.1)),
        mean_sbpp: mean(solved.iter().map(|c| c.2)),
        ratio_one_plus_one: mean(solved.iter().map(|c| (c.0 - c.2) / c.2)),
        ratio_one_plus_n: mean(solved.iter().map(|c| (c.1 - c.2) / c.2)),
    }
}

/// Draw `d` for demand count `n` uses the generator seeded with
/// `seed + n`, advanced through the earlier draws for that count.
pub fn compare(g: &Graph, options: &CompareOptions) -> Comparison {
    let mut rows = Vec::new();
    let mut instances = Vec::new();
    for &count in &options.counts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(count as u64));
        let batch: Vec<Instance> = (0..options.draws)
            .map(|draw| {
                let demands = random_demands(g, count, &mut rng);
                run_instance(g, &demands, count, draw, &options.solve)
            })
            .collect();
        rows.push(summarize(count, &batch));
        instances.extend(batch);
    }
    Comparison { rows, instances }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demand_draws_are_distinct_and_seeded() {
        let g = Graph::with_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_demands(&g, 10, &mut rng);
        assert_eq!(d.len(), 10);
        let mut pairs: Vec<(usize, usize)> = d.iter().map(|d| (d.s.0, d.t.0)).collect();
        assert!(pairs.iter().all(|(s, t)| s < t));
        pairs.dedup();
        assert_eq!(pairs.len(), 10);
        let again = random_demands(&g, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(again, random_demands(&g, 3, &mut ChaCha8Rng::seed_from_u64(9)));
    }

    #[test]
    fn single_demand_rows_match_dedicated_cost() {
        let g = Graph::with_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 3.0), (0, 2, 2.0)]);
        let options = CompareOptions {
            counts: vec![1],
            draws: 3,
            seed: 5,
            solve: SolveOptions::default(),
        };
        let c = compare(&g, &options);
        assert_eq!(c.rows[0].solved, 3);
        for i in &c.instances {
            assert!(i.all_optimal() && i.ordered());
            assert_eq!(i.one_plus_one.as_ref().unwrap().cost, i.one_plus_n.as_ref().unwrap().cost);
        }
        assert_eq!(c.rows[0].ratio_one_plus_one, c.rows[0].ratio_one_plus_n);
    }
}
