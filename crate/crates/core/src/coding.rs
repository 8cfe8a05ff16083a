//! Encoding coefficients: one field element per (walk, connection) pair.
//!
//! Row `k` of a [`CoefficientMatrix`] belongs to protection walk `k`, column
//! `l` to connection `l`. Entries outside the [`ProtectionMask`] are
//! structural zeros; entries inside are nonzero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::galois::{Field, FieldError, FieldMatrix, Gf};
use crate::topology::Provisioning;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodingError {
    #[error("field of order {order} is too small: {needed} elements required")]
    FieldTooSmall { needed: usize, order: u32 },
    #[error("construction needs every walk to protect every connection")]
    StructuralZeros,
    #[error("evaluation sets overlap at element {0}")]
    Overlap(Gf),
    #[error("no completion after {attempts} attempts; submatrix {submatrix} stays rank deficient")]
    CompletionFailed { attempts: usize, submatrix: usize },
    #[error("coefficient ({walk}, {conn}) disagrees with the protection mask")]
    MaskMismatch { walk: usize, conn: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Which walks protect which connections.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectionMask {
    pub walks: usize,
    pub conns: usize,
    protected: Vec<bool>,
}

impl ProtectionMask {
    pub fn full(walks: usize, conns: usize) -> Self {
        ProtectionMask {
            walks,
            conns,
            protected: vec![true; walks * conns],
        }
    }

    pub fn empty(walks: usize, conns: usize) -> Self {
        ProtectionMask {
            walks,
            conns,
            protected: vec![false; walks * conns],
        }
    }

    pub fn from_provisioning(p: &Provisioning) -> Self {
        let mut m = ProtectionMask::empty(p.groups.len(), p.demands.len());
        for (k, g) in p.groups.iter().enumerate() {
            for &c in &g.members {
                m.set(k, c, true);
            }
        }
        m
    }

    pub fn get(&self, walk: usize, conn: usize) -> bool {
        self.protected[walk * self.conns + conn]
    }

    pub fn set(&mut self, walk: usize, conn: usize, on: bool) {
        self.protected[walk * self.conns + conn] = on;
    }

    pub fn is_full(&self) -> bool {
        self.protected.iter().all(|&p| p)
    }

    pub fn walks_of(&self, conn: usize) -> Vec<usize> {
        (0..self.walks).filter(|&k| self.get(k, conn)).collect()
    }

    pub fn conns_of(&self, walk: usize) -> Vec<usize> {
        (0..self.conns).filter(|&l| self.get(walk, l)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    pub matrix: FieldMatrix,
    pub mask: ProtectionMask,
}

impl CoefficientMatrix {
    pub fn alpha(&self, walk: usize, conn: usize) -> Gf {
        self.matrix.get(walk, conn)
    }

    /// Checks shape, field and that the support equals the mask.
    pub fn validate(&self, field: &Field) -> Result<(), CodingError> {
        if self.matrix.spec != field.spec() {
            return Err(FieldError::SpecMismatch {
                left: field.spec(),
                right: self.matrix.spec,
            }
            .into());
        }
        if self.matrix.rows != self.mask.walks || self.matrix.cols != self.mask.conns {
            return Err(FieldError::Shape("coefficient matrix and mask differ in shape".into()).into());
        }
        for k in 0..self.mask.walks {
            for l in 0..self.mask.conns {
                let v = field.check(self.alpha(k, l))?;
                if v.is_zero() == self.mask.get(k, l) {
                    return Err(CodingError::MaskMismatch { walk: k, conn: l });
                }
            }
        }
        Ok(())
    }

    pub fn submatrix(&self, sub: &Submatrix) -> FieldMatrix {
        self.matrix.submatrix(&sub.rows, &sub.cols)
    }
}

fn from_fn(
    field: &Field,
    mask: &ProtectionMask,
    mut f: impl FnMut(usize, usize) -> Result<Gf, CodingError>,
) -> Result<CoefficientMatrix, CodingError> {
    let mut m = FieldMatrix::zeros(field.spec(), mask.walks, mask.conns);
    for k in 0..mask.walks {
        for l in 0..mask.conns {
            if mask.get(k, l) {
                m.set(k, l, f(k, l)?);
            }
        }
    }
    Ok(CoefficientMatrix {
        matrix: m,
        mask: mask.clone(),
    })
}

/// Every protected entry set to one; the encoding degenerates to plain XOR.
pub fn assign_all_ones(mask: &ProtectionMask, field: &Field) -> CoefficientMatrix {
    from_fn(field, mask, |_, _| Ok(Gf::ONE)).expect("constant assignment")
}

/// `alpha(k, l) = lambda_l^k` with `lambda_l` the `l`-th nonzero element, so
/// any square block on the leading rows is a Vandermonde matrix on distinct
/// points.
pub fn assign_vandermonde(mask: &ProtectionMask, field: &Field) -> Result<CoefficientMatrix, CodingError> {
    if !mask.is_full() {
        return Err(CodingError::StructuralZeros);
    }
    if mask.conns as u64 > u64::from(field.order()) - 1 {
        return Err(CodingError::FieldTooSmall {
            needed: mask.conns + 1,
            order: field.order(),
        });
    }
    from_fn(field, mask, |k, l| {
        let lambda = field.nth_nonzero(l + 1)?;
        Ok(field.pow(lambda, k as u64))
    })
}

/// Cauchy matrix `1 / (x_k + y_l)`; both point sets must be disjoint.
pub fn cauchy_matrix(field: &Field, x: &[Gf], y: &[Gf]) -> Result<FieldMatrix, CodingError> {
    for a in x {
        field.check(*a)?;
        if y.contains(a) {
            return Err(CodingError::Overlap(*a));
        }
    }
    let mut m = FieldMatrix::zeros(field.spec(), x.len(), y.len());
    for (k, &a) in x.iter().enumerate() {
        for (l, &b) in y.iter().enumerate() {
            m.set(k, l, field.inv(field.add(a, field.check(b)?))?);
        }
    }
    Ok(m)
}

/// Cauchy assignment on points taken in the order `1, 2, ..., q-1, 0`:
/// the first `K` for walks, the next `N` for connections. Entries outside
/// the mask are zeroed.
pub fn assign_cauchy(mask: &ProtectionMask, field: &Field) -> Result<CoefficientMatrix, CodingError> {
    let needed = mask.walks + mask.conns;
    if needed as u64 > u64::from(field.order()) {
        return Err(CodingError::FieldTooSmall {
            needed,
            order: field.order(),
        });
    }
    let q = field.order();
    let points: Vec<Gf> = (1..q).chain([0]).take(needed).map(|v| Gf(v as u16)).collect();
    let full = cauchy_matrix(field, &points[..mask.walks], &points[mask.walks..])?;
    from_fn(field, mask, |k, l| Ok(full.get(k, l)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    Uniform,
    NonZero,
}

pub fn sample_element(field: &Field, rng: &mut impl Rng, sampling: Sampling) -> Gf {
    let lo = match sampling {
        Sampling::Uniform => 0,
        Sampling::NonZero => 1,
    };
    Gf(rng.gen_range(lo..field.order()) as u16)
}

pub fn random_matrix(
    field: &Field,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
    sampling: Sampling,
) -> FieldMatrix {
    let mut m = FieldMatrix::zeros(field.spec(), rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, sample_element(field, rng, sampling));
        }
    }
    m
}

/// Independent nonzero entries on the mask.
pub fn assign_random(mask: &ProtectionMask, field: &Field, seed: u64) -> CoefficientMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assign_random_with(mask, field, &mut rng)
}

fn assign_random_with(mask: &ProtectionMask, field: &Field, rng: &mut impl Rng) -> CoefficientMatrix {
    from_fn(field, mask, |_, _| Ok(sample_element(field, rng, Sampling::NonZero))).expect("sampling")
}

/// Probability that a uniformly random `t x t` matrix over GF(q) is
/// nonsingular: `prod_{i=1..t} (1 - q^-i)`.
pub fn full_rank_probability(q: u32, t: usize) -> f64 {
    (1..=t).map(|i| 1.0 - f64::from(q).powi(-(i as i32))).product()
}

/// Rows (walks) and columns (connections) of a coefficient submatrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Submatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Largest rank any nonzero filling of the mask can give the submatrix:
/// the size of a maximum matching between its rows and columns.
pub fn structural_rank(mask: &ProtectionMask, sub: &Submatrix) -> usize {
    let mut owner: Vec<Option<usize>> = vec![None; sub.cols.len()];
    fn augment(
        r: usize,
        mask: &ProtectionMask,
        sub: &Submatrix,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for c in 0..sub.cols.len() {
            if !mask.get(sub.rows[r], sub.cols[c]) || seen[c] {
                continue;
            }
            seen[c] = true;
            if owner[c].is_none_or(|o| augment(o, mask, sub, seen, owner)) {
                owner[c] = Some(r);
                return true;
            }
        }
        false
    }
    (0..sub.rows.len())
        .filter(|&r| {
            let mut seen = vec![false; sub.cols.len()];
            augment(r, mask, sub, &mut seen, &mut owner)
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub coefficients: CoefficientMatrix,
    pub attempts: usize,
    /// Required submatrices whose mask already caps them below full rank;
    /// they are held to their structural rank instead.
    pub deficient: Vec<usize>,
}

/// Draws random nonzero fillings until every required submatrix attains its
/// structural rank.
pub fn complete_matrix(
    mask: &ProtectionMask,
    required: &[Submatrix],
    field: &Field,
    seed: u64,
    max_attempts: usize,
) -> Result<Completion, CodingError> {
    let targets: Vec<usize> = required.iter().map(|s| structural_rank(mask, s)).collect();
    let deficient: Vec<usize> = (0..required.len())
        .filter(|&i| targets[i] < required[i].rows.len().min(required[i].cols.len()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_bad = 0;
    for attempt in 1..=max_attempts {
        let coefficients = assign_random_with(mask, field, &mut rng);
        let bad = required.iter().zip(&targets).position(|(s, &t)| {
            field.rank(&coefficients.submatrix(s)).expect("same field") < t
        });
        match bad {
            None => {
                return Ok(Completion {
                    coefficients,
                    attempts: attempt,
                    deficient,
                })
            }
            Some(i) => last_bad = i,
        }
    }
    Err(CodingError::CompletionFailed {
        attempts: max_attempts,
        submatrix: last_bad,
    })
}

/// Failed working connections and failed protection walks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailurePattern {
    pub connections: BTreeSet<usize>,
    pub walks: BTreeSet<usize>,
}

impl FailurePattern {
    pub fn new(connections: impl IntoIterator<Item = usize>, walks: impl IntoIterator<Item = usize>) -> Self {
        FailurePattern {
            connections: connections.into_iter().collect(),
            walks: walks.into_iter().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.connections.len() + self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn includes(&self, other: &FailurePattern) -> bool {
        other.connections.is_subset(&self.connections) && other.walks.is_subset(&self.walks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::FieldSpec;

    #[test]
    fn vandermonde_rows_are_powers() {
        let f = Field::gf256();
        let c = assign_vandermonde(&ProtectionMask::full(2, 3), &f).unwrap();
        assert_eq!(c.matrix.row(0), &[Gf(1), Gf(1), Gf(1)]);
        assert_eq!(c.matrix.row(1), &[Gf(1), Gf(2), Gf(3)]);
        let mut m = ProtectionMask::full(2, 3);
        m.set(0, 0, false);
        assert_eq!(assign_vandermonde(&m, &f), Err(CodingError::StructuralZeros));
        let small = Field::new(FieldSpec::new(2, 0b111).unwrap()).unwrap();
        assert!(matches!(
            assign_vandermonde(&ProtectionMask::full(1, 4), &small),
            Err(CodingError::FieldTooSmall { .. })
        ));
    }

    #[test]
    fn cauchy_single_entry_and_overlap() {
        let f = Field::gf256();
        let m = cauchy_matrix(&f, &[Gf(1)], &[Gf(2)]).unwrap();
        assert_eq!(m.get(0, 0), f.inv(Gf(3)).unwrap());
        assert_eq!(cauchy_matrix(&f, &[Gf(1), Gf(2)], &[Gf(2)]), Err(CodingError::Overlap(Gf(2))));
        let c = assign_cauchy(&ProtectionMask::full(1, 1), &f).unwrap();
        assert_eq!(c.alpha(0, 0), m.get(0, 0));
    }

    #[test]
    fn cauchy_needs_room_for_both_point_sets() {
        let f = Field::new(FieldSpec::new(2, 0b111).unwrap()).unwrap();
        assert!(assign_cauchy(&ProtectionMask::full(2, 2), &f).is_ok());
        assert!(matches!(
            assign_cauchy(&ProtectionMask::full(2, 3), &f),
            Err(CodingError::FieldTooSmall { needed: 5, order: 4 })
        ));
    }

    #[test]
    fn random_assignment_respects_mask() {
        let f = Field::gf256();
        let mut m = ProtectionMask::full(3, 4);
        m.set(1, 2, false);
        let c = assign_random(&m, &f, 9);
        c.validate(&f).unwrap();
        assert_eq!(c, assign_random(&m, &f, 9));
    }

    #[test]
    fn structurally_deficient_target_is_accepted() {
        let f = Field::gf256();
        let mut m = ProtectionMask::full(2, 2);
        m.set(0, 0, false);
        m.set(0, 1, false);
        let sub = Submatrix {
            rows: vec![0, 1],
            cols: vec![0, 1],
        };
        assert_eq!(structural_rank(&m, &sub), 1);
        let done = complete_matrix(&m, &[sub], &f, 1, 8).unwrap();
        assert_eq!(done.attempts, 1);
        assert_eq!(done.deficient, vec![0]);
    }

    #[test]
    fn completion_failure_names_submatrix() {
        // Over GF(2) every nonzero entry is one, so the all-ones 2x2 block is
        // always singular.
        let f = Field::new(FieldSpec::new(1, 0b11).unwrap()).unwrap();
        let m = ProtectionMask::full(2, 2);
        let sub = Submatrix {
            rows: vec![0, 1],
            cols: vec![0, 1],
        };
        assert_eq!(
            complete_matrix(&m, &[sub], &f, 3, 5),
            Err(CodingError::CompletionFailed {
                attempts: 5,
                submatrix: 0
            })
        );
    }

    #[test]
    fn full_rank_probability_first_term() {
        assert_eq!(full_rank_probability(16, 1), 1.0 - 1.0 / 16.0);
        assert!(full_rank_probability(256, 8) > 0.99);
    }
}
