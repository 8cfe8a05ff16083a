use crate::scalar::LpScalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
}

#[derive(Clone, Debug)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    /// `None` is an unbounded upper side.
    pub upper: Option<T>,
    pub cost: T,
    pub kind: VarKind,
    /// Lower classes are branched on first.
    pub branch_class: u32,
}

impl<T: LpScalar> Variable<T> {
    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Integer
            && self.lower.is_zero()
            && self.upper.as_ref().is_some_and(|u| u.is_one())
    }
}

#[derive(Clone, Debug)]
pub struct Constraint<T> {
    pub name: String,
    pub terms: Vec<(VarId, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: LpScalar> Constraint<T> {
    pub fn activity(&self, values: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (v, a)| acc + a.clone() * values[v.0].clone())
    }

    /// Amount by which `values` violate the row; zero when satisfied.
    pub fn violation(&self, values: &[T]) -> T {
        let lhs = self.activity(values);
        let zero = T::zero();
        match self.sense {
            Sense::Le => pos(lhs - self.rhs.clone(), zero),
            Sense::Ge => pos(self.rhs.clone() - lhs, zero),
            Sense::Eq => (lhs - self.rhs.clone()).abs(),
        }
    }
}

fn pos<T: LpScalar>(v: T, zero: T) -> T {
    if v > zero {
        v
    } else {
        zero
    }
}

/// Minimisation problem over bounded-below variables.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram<T> {
    pub vars: Vec<Variable<T>>,
    pub rows: Vec<Constraint<T>>,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new() -> Self {
        LinearProgram {
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: T,
        upper: Option<T>,
        cost: T,
        kind: VarKind,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
            kind,
            branch_class: 0,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: T) -> VarId {
        self.add_var(name, T::zero(), Some(T::one()), cost, VarKind::Integer)
    }

    pub fn set_branch_class(&mut self, var: VarId, class: u32) {
        self.vars[var.0].branch_class = class;
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, T)>,
        sense: Sense,
        rhs: T,
    ) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[T]) -> T {
        self.vars
            .iter()
            .zip(values)
            .fold(T::zero(), |acc, (v, x)| acc + v.cost.clone() * x.clone())
    }

    /// True when every objective coefficient on a nonzero-cost variable is an
    /// integer attached to an integer variable, so optimal values are integral.
    pub fn has_integral_objective(&self) -> bool {
        self.vars
            .iter()
            .all(|v| v.cost.is_zero() || (v.kind == VarKind::Integer && v.cost.is_integral()))
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[T]) -> T {
        let mut worst = T::zero();
        for (v, x) in self.vars.iter().zip(values) {
            let below = v.lower.clone() - x.clone();
            if below > worst {
                worst = below;
            }
            if let Some(u) = &v.upper {
                let above = x.clone() - u.clone();
                if above > worst {
                    worst = above;
                }
            }
        }
        for row in &self.rows {
            let viol = row.violation(values);
            if viol > worst {
                worst = viol;
            }
        }
        worst
    }

    /// Converts every coefficient through `f`, keeping the structure.
    pub fn map_scalar<U: LpScalar>(&self, f: impl Fn(&T) -> U) -> LinearProgram<U> {
        LinearProgram {
            vars: self
                .vars
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    lower: f(&v.lower),
                    upper: v.upper.as_ref().map(&f),
                    cost: f(&v.cost),
                    kind: v.kind,
                    branch_class: v.branch_class,
                })
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Constraint {
                    name: r.name.clone(),
                    terms: r.terms.iter().map(|(v, a)| (*v, f(a))).collect(),
                    sense: r.sense,
                    rhs: f(&r.rhs),
                })
                .collect(),
        }
    }
}
