//! Dense bounded dual simplex.
//!
//! Every row `i` is stored as `a_i x + s_i = b_i` with a slack column
//! `s_i`; `>=` rows are negated on entry. Slack bounds are `[0, inf)` for
//! inequality rows and `[0, 0]` for equalities. The tableau always holds
//! `B^-1 [A I]` for the current basis `B`.
//!
//! Nonbasic columns rest at a finite bound chosen so that the basis is dual
//! feasible, which makes bound changes and appended rows cheap to
//! re-optimise: only primal feasibility is ever lost.

use crate::problem::{LinearProgram, Sense, VarId};
use crate::scalar::LpScalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rest {
    Lower,
    Upper,
}

/// Pivots between two refactorisations of the float tableau.
const REFACTOR_EVERY: usize = 400;

/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 64;

/// Bound standing in for an infinite upper bound on a column whose cost is
/// negative; reaching it at optimality signals an unbounded problem.
const ARTIFICIAL_BOUND: i64 = 1_000_000_000;

pub struct DualSimplex<T> {
    num_struct: usize,
    lower: Vec<T>,
    upper: Vec<Option<T>>,
    artificial: Vec<bool>,
    cost: Vec<T>,
    rows: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    tableau: Vec<Vec<T>>,
    beta: Vec<T>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    rest: Vec<Rest>,
    reduced: Vec<T>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
}

impl<T: LpScalar> DualSimplex<T> {
    pub fn new(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars();
        let mut s = DualSimplex {
            num_struct: n,
            lower: lp.vars.iter().map(|v| v.lower.clone()).collect(),
            upper: lp.vars.iter().map(|v| v.upper.clone()).collect(),
            artificial: vec![false; n],
            cost: lp.vars.iter().map(|v| v.cost.clone()).collect(),
            rows: Vec::new(),
            rhs: Vec::new(),
            tableau: Vec::new(),
            beta: Vec::new(),
            basis: Vec::new(),
            position: vec![None; n],
            rest: vec![Rest::Lower; n],
            reduced: lp.vars.iter().map(|v| v.cost.clone()).collect(),
            since_refactor: 0,
            iterations: 0,
            max_iterations: 0,
        };
        for j in 0..n {
            s.choose_rest(j);
        }
        for row in &lp.rows {
            let terms: Vec<(usize, T)> = row.terms.iter().map(|(v, a)| (v.0, a.clone())).collect();
            s.push_row(terms, row.sense, row.rhs.clone());
        }
        s
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn num_cols(&self) -> usize {
        self.lower.len()
    }

    /// Places nonbasic column `j` at the bound matching the sign of its
    /// reduced cost.
    fn choose_rest(&mut self, j: usize) {
        let d = &self.reduced[j];
        if *d >= T::zero() || (self.upper[j].is_none() && d.is_negligible()) {
            self.rest[j] = Rest::Lower;
        } else if self.upper[j].is_some() {
            self.rest[j] = Rest::Upper;
        } else {
            self.upper[j] = Some(T::from_i64_lossless(ARTIFICIAL_BOUND));
            self.artificial[j] = true;
            self.rest[j] = Rest::Upper;
        }
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.rest[j] {
            Rest::Lower => self.lower[j].clone(),
            Rest::Upper => self.upper[j].clone().expect("upper rest has a bound"),
        }
    }

    fn value(&self, j: usize) -> T {
        match self.position[j] {
            Some(r) => self.beta[r].clone(),
            None => self.nonbasic_value(j),
        }
    }

    /// Values of the structural columns.
    pub fn primal_values(&self) -> Vec<T> {
        (0..self.num_struct).map(|j| self.value(j)).collect()
    }

    pub fn objective(&self) -> T {
        (0..self.num_struct).fold(T::zero(), |acc, j| {
            acc + self.cost[j].clone() * self.value(j)
        })
    }

    pub fn bounds(&self, var: VarId) -> (T, Option<T>) {
        let j = var.0;
        let upper = if self.artificial[j] {
            None
        } else {
            self.upper[j].clone()
        };
        (self.lower[j].clone(), upper)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: T, upper: Option<T>) {
        let j = var.0;
        let old = self.value(j);
        self.lower[j] = lower;
        self.artificial[j] = false;
        self.upper[j] = upper;
        if self.position[j].is_some() {
            return;
        }
        // While fixed the column never prices, so its reduced cost may have
        // either sign; re-derive the resting bound from it.
        self.choose_rest(j);
        let new = self.nonbasic_value(j);
        let delta = new - old;
        if !delta.is_zero() {
            for r in 0..self.beta.len() {
                let a = &self.tableau[r][j];
                if !a.is_zero() {
                    let upd = a.clone() * delta.clone();
                    self.beta[r] = self.beta[r].clone() - upd;
                }
            }
        }
    }

    /// Appends a row; its slack enters the basis so dual feasibility holds.
    pub fn add_row(&mut self, terms: &[(VarId, T)], sense: Sense, rhs: T) {
        let terms: Vec<(usize, T)> = terms.iter().map(|(v, a)| (v.0, a.clone())).collect();
        self.push_row(terms, sense, rhs);
    }

    fn push_row(&mut self, mut terms: Vec<(usize, T)>, sense: Sense, mut rhs: T) {
        if sense == Sense::Ge {
            for (_, a) in terms.iter_mut() {
                *a = -a.clone();
            }
            rhs = -rhs;
        }
        let slack = self.num_cols();
        self.lower.push(T::zero());
        self.upper.push(if sense == Sense::Eq {
            Some(T::zero())
        } else {
            None
        });
        self.artificial.push(false);
        self.cost.push(T::zero());
        self.reduced.push(T::zero());
        self.rest.push(Rest::Lower);
        self.position.push(None);
        for row in self.tableau.iter_mut() {
            row.push(T::zero());
        }

        let ncols = self.num_cols();
        let mut dense = vec![T::zero(); ncols];
        for (j, a) in &terms {
            dense[*j] = dense[*j].clone() + a.clone();
        }
        dense[slack] = T::one();
        let activity = terms
            .iter()
            .fold(T::zero(), |acc, (j, a)| acc + a.clone() * self.value(*j));
        for r in 0..self.basis.len() {
            let f = dense[self.basis[r]].clone();
            if f.is_zero() {
                continue;
            }
            for (k, t) in self.tableau[r].iter().enumerate() {
                if !t.is_zero() {
                    dense[k] = dense[k].clone() - f.clone() * t.clone();
                }
            }
        }
        for r in 0..self.basis.len() {
            dense[self.basis[r]] = T::zero();
        }
        self.rows.push(terms);
        self.rhs.push(rhs.clone());
        self.tableau.push(dense);
        self.beta.push(rhs - activity);
        self.basis.push(slack);
        self.position[slack] = Some(self.basis.len() - 1);
    }

    fn infeasibility(&self, r: usize) -> Option<(T, bool)> {
        let col = self.basis[r];
        let b = &self.beta[r];
        let tol = T::feasibility_tolerance();
        let below = self.lower[col].clone() - b.clone();
        if below > tol {
            return Some((below, true));
        }
        if let Some(u) = &self.upper[col] {
            let above = b.clone() - u.clone();
            if above > tol {
                return Some((above, false));
            }
        }
        None
    }

    fn select_leaving(&self, bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, T, bool)> = None;
        for r in 0..self.basis.len() {
            if let Some((amount, below)) = self.infeasibility(r) {
                let better = match &best {
                    None => true,
                    Some((br, bamount, _)) => {
                        if bland {
                            self.basis[r] < self.basis[*br]
                        } else {
                            amount > *bamount
                        }
                    }
                };
                if better {
                    best = Some((r, amount, below));
                }
            }
        }
        best.map(|(r, _, below)| (r, below))
    }

    /// Dual ratio test on row `r`. `below` means the basic variable must
    /// increase to its lower bound.
    fn select_entering(&self, r: usize, below: bool, bland: bool) -> Option<usize> {
        let row = &self.tableau[r];
        let pivot_tol = if T::is_exact() {
            T::zero()
        } else {
            T::from_f64(1e-9).unwrap()
        };
        let dual_tol = if T::is_exact() {
            T::zero()
        } else {
            T::from_f64(1e-9).unwrap()
        };
        let mut candidates: Vec<(usize, T, T)> = Vec::new();
        for j in 0..row.len() {
            if self.position[j].is_some() {
                continue;
            }
            let a = &row[j];
            if a.abs() <= pivot_tol {
                continue;
            }
            if let Some(u) = &self.upper[j] {
                if *u == self.lower[j] {
                    continue;
                }
            }
            let at_lower = self.rest[j] == Rest::Lower;
            let eligible = if below {
                (at_lower && *a < T::zero()) || (!at_lower && *a > T::zero())
            } else {
                (at_lower && *a > T::zero()) || (!at_lower && *a < T::zero())
            };
            if !eligible {
                continue;
            }
            let mut d = self.reduced[j].clone();
            if at_lower && d < T::zero() {
                d = T::zero();
            }
            if !at_lower && d > T::zero() {
                d = T::zero();
            }
            let ratio = (d / a.clone()).abs();
            candidates.push((j, ratio, a.abs()));
        }
        if candidates.is_empty() {
            return None;
        }
        if bland {
            let min = candidates
                .iter()
                .map(|c| c.1.clone())
                .fold(None, |m: Option<T>, x| match m {
                    Some(m) if m <= x => Some(m),
                    _ => Some(x),
                })
                .unwrap();
            return candidates
                .iter()
                .filter(|c| c.1 <= min.clone() + dual_tol.clone())
                .map(|c| c.0)
                .min();
        }
        // Harris two-pass: relaxed bound first, then the largest pivot in it.
        let bound = candidates
            .iter()
            .map(|(_, ratio, a)| ratio.clone() + dual_tol.clone() / a.clone())
            .fold(None, |m: Option<T>, x| match m {
                Some(m) if m <= x => Some(m),
                _ => Some(x),
            })
            .unwrap();
        candidates
            .into_iter()
            .filter(|c| c.1 <= bound)
            .fold(None, |best: Option<(usize, T)>, (j, _, a)| match best {
                Some((bj, ba)) if ba >= a => Some((bj, ba)),
                _ => Some((j, a)),
            })
            .map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize, below: bool) {
        let leaving = self.basis[r];
        let target = if below {
            self.lower[leaving].clone()
        } else {
            self.upper[leaving].clone().expect("leaving above an upper bound")
        };
        let alpha = self.tableau[r][j].clone();
        let delta = (self.beta[r].clone() - target) / alpha.clone();
        let entering_value = self.nonbasic_value(j) + delta.clone();
        for i in 0..self.beta.len() {
            if i == r {
                continue;
            }
            let a = &self.tableau[i][j];
            if !a.is_zero() {
                let upd = a.clone() * delta.clone();
                self.beta[i] = self.beta[i].clone() - upd;
            }
        }
        self.beta[r] = entering_value;

        let inv = T::one() / alpha;
        let mut prow: Vec<(usize, T)> = Vec::new();
        for (k, t) in self.tableau[r].iter_mut().enumerate() {
            if t.is_zero() {
                continue;
            }
            let v = t.clone() * inv.clone();
            *t = v.clone();
            prow.push((k, v));
        }
        self.tableau[r][j] = T::one();
        let exact = T::is_exact();
        for i in 0..self.tableau.len() {
            if i == r {
                continue;
            }
            let f = self.tableau[i][j].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.tableau[i];
            for (k, v) in &prow {
                let nv = row[*k].clone() - f.clone() * v.clone();
                row[*k] = if !exact && nv.is_negligible() {
                    T::zero()
                } else {
                    nv
                };
            }
            row[j] = T::zero();
        }
        let dj = self.reduced[j].clone();
        if !dj.is_zero() {
            for (k, v) in &prow {
                let nv = self.reduced[*k].clone() - dj.clone() * v.clone();
                self.reduced[*k] = nv;
            }
        }
        self.reduced[j] = T::zero();

        self.basis[r] = j;
        self.position[j] = Some(r);
        self.position[leaving] = None;
        self.rest[leaving] = if below { Rest::Lower } else { Rest::Upper };
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Rebuilds the tableau, basic values and reduced costs from the
    /// original rows for the current basis. Falls back to the slack basis if
    /// the basis has become numerically singular.
    pub fn refactor(&mut self) {
        let m = self.rows.len();
        let ncols = self.num_cols();
        let mut mat: Vec<Vec<T>> = Vec::with_capacity(m);
        for (i, terms) in self.rows.iter().enumerate() {
            let mut dense = vec![T::zero(); ncols + 1];
            for (j, a) in terms {
                dense[*j] = dense[*j].clone() + a.clone();
            }
            dense[self.num_struct + i] = T::one();
            dense[ncols] = self.rhs[i].clone();
            mat.push(dense);
        }
        let mut assigned: Vec<Option<usize>> = vec![None; m];
        let mut used = vec![false; m];
        let mut singular = false;
        for (slot, &col) in self.basis.iter().enumerate() {
            let mut best: Option<usize> = None;
            for i in 0..m {
                if used[i] {
                    continue;
                }
                let better = match best {
                    None => !mat[i][col].is_zero(),
                    Some(b) => mat[i][col].abs() > mat[b][col].abs(),
                };
                if better {
                    best = Some(i);
                }
            }
            let p = match best {
                Some(p) if mat[p][col].abs() > T::zero_tolerance() => p,
                _ => {
                    singular = true;
                    break;
                }
            };
            used[p] = true;
            assigned[slot] = Some(p);
            let inv = T::one() / mat[p][col].clone();
            for v in mat[p].iter_mut() {
                if !v.is_zero() {
                    *v = v.clone() * inv.clone();
                }
            }
            let prow: Vec<(usize, T)> = mat[p]
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(k, v)| (k, v.clone()))
                .collect();
            for i in 0..m {
                if i == p {
                    continue;
                }
                let f = mat[i][col].clone();
                if f.is_zero() {
                    continue;
                }
                for (k, v) in &prow {
                    let nv = mat[i][*k].clone() - f.clone() * v.clone();
                    mat[i][*k] = if !T::is_exact() && nv.is_negligible() {
                        T::zero()
                    } else {
                        nv
                    };
                }
                mat[i][col] = T::zero();
            }
        }
        if singular {
            self.reset_to_slack_basis();
            return;
        }
        let mut tableau = Vec::with_capacity(m);
        let mut h = Vec::with_capacity(m);
        for slot in 0..m {
            let mut row = std::mem::take(&mut mat[assigned[slot].unwrap()]);
            h.push(row.pop().unwrap());
            tableau.push(row);
        }
        self.tableau = tableau;
        self.recompute_from_tableau(h);
        self.since_refactor = 0;
    }

    fn recompute_from_tableau(&mut self, h: Vec<T>) {
        let m = self.basis.len();
        let ncols = self.num_cols();
        let mut reduced = self.cost.clone();
        for r in 0..m {
            let cb = self.cost[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            for (k, t) in self.tableau[r].iter().enumerate() {
                if !t.is_zero() {
                    reduced[k] = reduced[k].clone() - cb.clone() * t.clone();
                }
            }
        }
        for r in 0..m {
            reduced[self.basis[r]] = T::zero();
        }
        self.reduced = reduced;
        let tol = if T::is_exact() {
            T::zero()
        } else {
            T::from_f64(1e-9).unwrap()
        };
        for j in 0..ncols {
            if self.position[j].is_some() {
                continue;
            }
            let d = &self.reduced[j];
            let wrong = match self.rest[j] {
                Rest::Lower => *d < -tol.clone(),
                Rest::Upper => *d > tol,
            };
            if wrong {
                self.choose_rest(j);
            }
        }
        let mut beta = h;
        for j in 0..ncols {
            if self.position[j].is_some() {
                continue;
            }
            let x = self.nonbasic_value(j);
            if x.is_zero() {
                continue;
            }
            for (r, b) in beta.iter_mut().enumerate() {
                let a = &self.tableau[r][j];
                if !a.is_zero() {
                    *b = b.clone() - a.clone() * x.clone();
                }
            }
        }
        self.beta = beta;
    }

    fn reset_to_slack_basis(&mut self) {
        let m = self.rows.len();
        let ncols = self.num_cols();
        for j in 0..ncols {
            self.position[j] = None;
        }
        self.basis = (0..m).map(|i| self.num_struct + i).collect();
        for (r, &c) in self.basis.iter().enumerate() {
            self.position[c] = Some(r);
        }
        let mut tableau = Vec::with_capacity(m);
        for (i, terms) in self.rows.iter().enumerate() {
            let mut dense = vec![T::zero(); ncols];
            for (j, a) in terms {
                dense[*j] = dense[*j].clone() + a.clone();
            }
            dense[self.num_struct + i] = T::one();
            tableau.push(dense);
        }
        self.tableau = tableau;
        self.reduced = self.cost.clone();
        for j in 0..ncols {
            if self.position[j].is_none() {
                self.choose_rest(j);
            }
        }
        let h = self.rhs.clone();
        self.recompute_from_tableau(h);
        self.since_refactor = 0;
    }

    /// Re-optimises from the current basis.
    pub fn solve(&mut self) -> LpStatus {
        self.max_iterations = self.iterations + 50 * (self.num_cols() + self.rows.len()) + 10_000;
        let mut degenerate = 0usize;
        let mut retried = false;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if !T::is_exact() && self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_SWITCH;
            let Some((r, below)) = self.select_leaving(bland) else {
                if !T::is_exact() && self.since_refactor > 0 && !retried {
                    retried = true;
                    self.refactor();
                    continue;
                }
                return self.finish();
            };
            let Some(j) = self.select_entering(r, below, bland) else {
                if !T::is_exact() && self.since_refactor > 0 {
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            };
            let step = (self.reduced[j].clone() / self.tableau[r][j].clone()).abs();
            if step.is_negligible() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            retried = false;
            self.pivot(r, j, below);
        }
    }

    fn finish(&self) -> LpStatus {
        for j in 0..self.num_struct {
            if self.artificial[j] && self.position[j].is_none() && self.rest[j] == Rest::Upper {
                return LpStatus::Unbounded;
            }
        }
        LpStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::VarKind;
    use num_rational::BigRational;

    fn textbook<T: LpScalar>() -> LinearProgram<T> {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18; optimum 36 at (2, 6).
        let mut lp = LinearProgram::new();
        let f = |v: f64| T::from_f64(v).unwrap();
        let x = lp.add_var("x", f(0.0), None, f(-3.0), VarKind::Continuous);
        let y = lp.add_var("y", f(0.0), None, f(-5.0), VarKind::Continuous);
        lp.add_row("a", vec![(x, f(1.0))], Sense::Le, f(4.0));
        lp.add_row("b", vec![(y, f(2.0))], Sense::Le, f(12.0));
        lp.add_row("c", vec![(x, f(3.0)), (y, f(2.0))], Sense::Le, f(18.0));
        lp
    }

    #[test]
    fn textbook_maximisation() {
        let lp = textbook::<f64>();
        let mut s = DualSimplex::new(&lp);
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() + 36.0).abs() < 1e-9);
        let x = s.primal_values();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);

        let lp = textbook::<BigRational>();
        let mut s = DualSimplex::new(&lp);
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert_eq!(s.objective(), BigRational::from_integer((-36).into()));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new();
        let x = lp.add_var("x", 0.0, Some(1.0), 1.0, VarKind::Continuous);
        lp.add_row("r", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(DualSimplex::new(&lp).solve(), LpStatus::Infeasible);

        let mut lp = LinearProgram::<f64>::new();
        let x = lp.add_var("x", 0.0, None, -1.0, VarKind::Continuous);
        let y = lp.add_var("y", 0.0, None, 0.0, VarKind::Continuous);
        lp.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(DualSimplex::new(&lp).solve(), LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_warm_bound_changes() {
        // min x + 2y + 3z s.t. x + y + z = 1 ; then forbid x, then forbid y.
        let mut lp = LinearProgram::<f64>::new();
        let x = lp.add_var("x", 0.0, Some(1.0), 1.0, VarKind::Continuous);
        let y = lp.add_var("y", 0.0, Some(1.0), 2.0, VarKind::Continuous);
        let z = lp.add_var("z", 0.0, Some(1.0), 3.0, VarKind::Continuous);
        lp.add_row("sum", vec![(x, 1.0), (y, 1.0), (z, 1.0)], Sense::Eq, 1.0);
        let mut s = DualSimplex::new(&lp);
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() - 1.0).abs() < 1e-12);
        s.set_bounds(x, 0.0, Some(0.0));
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() - 2.0).abs() < 1e-12);
        s.add_row(&[(y, 1.0)], Sense::Le, 0.25);
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() - (0.5 + 2.25)).abs() < 1e-12);
        s.set_bounds(x, 0.0, Some(1.0));
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refactor_preserves_solution() {
        let lp = textbook::<f64>();
        let mut s = DualSimplex::new(&lp);
        s.solve();
        let before = s.primal_values();
        s.refactor();
        let after = s.primal_values();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.solve(), LpStatus::Optimal);
    }
}
