//! Arithmetic in GF(2^m) for `1 <= m <= 16` and dense linear algebra over it.
//!
//! A field is named by its [`FieldSpec`]: the width `m` and a reduction
//! polynomial of degree `m` whose bits are the coefficients (bit `i` is the
//! coefficient of `x^i`). The default is GF(2^8) reduced by
//! `x^8 + x^4 + x^3 + x + 1`.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("field width {0} is outside 1..=16")]
    UnsupportedWidth(u8),
    #[error("polynomial {poly:#x} does not have degree {bits}")]
    WrongDegree { bits: u8, poly: u32 },
    #[error("polynomial {0:#x} is reducible over GF(2)")]
    Reducible(u32),
    #[error("value {value} is not an element of GF(2^{bits})")]
    OutOfRange { value: u32, bits: u8 },
    #[error("operands come from different fields: {left} and {right}")]
    SpecMismatch { left: FieldSpec, right: FieldSpec },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("evaluation points must be distinct")]
    RepeatedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub bits: u8,
    pub poly: u32,
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}) mod {:#x}", self.bits, self.poly)
    }
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::GF256
    }
}

impl FieldSpec {
    pub const GF256: FieldSpec = FieldSpec {
        bits: 8,
        poly: 0x11B,
    };

    /// Validates width, degree and irreducibility.
    pub fn new(bits: u8, poly: u32) -> Result<Self, FieldError> {
        if !(1..=16).contains(&bits) {
            return Err(FieldError::UnsupportedWidth(bits));
        }
        if degree(poly) != Some(u32::from(bits)) {
            return Err(FieldError::WrongDegree { bits, poly });
        }
        if !is_irreducible(poly) {
            return Err(FieldError::Reducible(poly));
        }
        Ok(FieldSpec { bits, poly })
    }

    /// Lowest-valued irreducible polynomial of degree `bits`.
    pub fn smallest(bits: u8) -> Result<Self, FieldError> {
        if !(1..=16).contains(&bits) {
            return Err(FieldError::UnsupportedWidth(bits));
        }
        let lo = 1u32 << bits;
        (lo..lo << 1)
            .find(|&p| is_irreducible(p))
            .map(|poly| FieldSpec { bits, poly })
            .ok_or(FieldError::UnsupportedWidth(bits))
    }

    pub fn order(&self) -> u32 {
        1 << self.bits
    }
}

fn degree(p: u32) -> Option<u32> {
    (p != 0).then(|| 31 - p.leading_zeros())
}

/// Remainder of carry-less division `a mod b`.
fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("nonzero divisor");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Trial division by every polynomial of degree `1..=deg/2`.
pub fn is_irreducible(poly: u32) -> bool {
    let Some(d) = degree(poly) else {
        return false;
    };
    if d == 0 {
        return false;
    }
    for div_deg in 1..=d / 2 {
        for div in (1u32 << div_deg)..(1u32 << (div_deg + 1)) {
            if poly_mod(poly, div) == 0 {
                return false;
            }
        }
    }
    true
}

/// Element of GF(2^m); valid values are `0..2^m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gf(pub u16);

impl Gf {
    pub const ZERO: Gf = Gf(0);
    pub const ONE: Gf = Gf(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Gf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Field context: spec plus log/antilog tables over a primitive element.
#[derive(Clone, Debug)]
pub struct Field {
    spec: FieldSpec,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Self, FieldError> {
        let spec = FieldSpec::new(spec.bits, spec.poly)?;
        let q = spec.order() as usize;
        let n = q - 1;
        let generator = (1..q as u32)
            .find(|&g| multiplicative_order(g, spec) == n)
            .expect("the multiplicative group of a finite field is cyclic");
        let mut exp = vec![0u16; 2 * n];
        let mut log = vec![0u16; q];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().take(n).enumerate() {
            *slot = x as u16;
            log[x as usize] = i as u16;
            x = mul_shift_xor(x, generator, spec);
        }
        for i in n..2 * n {
            exp[i] = exp[i - n];
        }
        Ok(Field { spec, exp, log })
    }

    pub fn gf256() -> Self {
        Field::new(FieldSpec::GF256).expect("0x11B is irreducible")
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    /// Number of elements `q = 2^m`.
    pub fn order(&self) -> u32 {
        self.spec.order()
    }

    pub fn elem(&self, value: u32) -> Result<Gf, FieldError> {
        if value < self.order() {
            Ok(Gf(value as u16))
        } else {
            Err(FieldError::OutOfRange {
                value,
                bits: self.spec.bits,
            })
        }
    }

    pub fn check(&self, a: Gf) -> Result<Gf, FieldError> {
        self.elem(u32::from(a.0))
    }

    pub fn elements(&self) -> impl Iterator<Item = Gf> {
        (0..self.order()).map(|v| Gf(v as u16))
    }

    pub fn add(&self, a: Gf, b: Gf) -> Gf {
        Gf(a.0 ^ b.0)
    }

    pub fn mul(&self, a: Gf, b: Gf) -> Gf {
        if a.is_zero() || b.is_zero() {
            return Gf::ZERO;
        }
        let s = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        Gf(self.exp[s])
    }

    /// Table-free product; agrees with [`Field::mul`].
    pub fn mul_direct(&self, a: Gf, b: Gf) -> Gf {
        Gf(mul_shift_xor(u32::from(a.0), u32::from(b.0), self.spec) as u16)
    }

    pub fn inv(&self, a: Gf) -> Result<Gf, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        let n = self.order() as usize - 1;
        let l = self.log[a.0 as usize] as usize;
        Ok(Gf(self.exp[(n - l) % n]))
    }

    pub fn div(&self, a: Gf, b: Gf) -> Result<Gf, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Gf, e: u64) -> Gf {
        if e == 0 {
            return Gf::ONE;
        }
        if a.is_zero() {
            return Gf::ZERO;
        }
        let n = self.order() as u64 - 1;
        let l = self.log[a.0 as usize] as u64;
        Gf(self.exp[((l * (e % n)) % n) as usize])
    }

    /// The `l`-th nonzero element, `l >= 1`, in value order.
    pub fn nth_nonzero(&self, l: usize) -> Result<Gf, FieldError> {
        self.elem(l as u32).and_then(|g| {
            if g.is_zero() {
                Err(FieldError::OutOfRange {
                    value: 0,
                    bits: self.spec.bits,
                })
            } else {
                Ok(g)
            }
        })
    }

    fn same_field(&self, m: &FieldMatrix) -> Result<(), FieldError> {
        if m.spec == self.spec {
            Ok(())
        } else {
            Err(FieldError::SpecMismatch {
                left: self.spec,
                right: m.spec,
            })
        }
    }

    fn check_vec(&self, v: &[Gf]) -> Result<(), FieldError> {
        v.iter().try_for_each(|&x| self.check(x).map(|_| ()))
    }

    /// Row-reduces `rows` in place over the first `coeff_cols` columns and
    /// returns the pivot columns in row order.
    fn reduce(&self, rows: &mut [Vec<Gf>], coeff_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..coeff_cols {
            let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
                continue;
            };
            rows.swap(r, p);
            let inv = self.inv(rows[r][c]).expect("pivot is nonzero");
            for x in rows[r].iter_mut() {
                *x = self.mul(*x, inv);
            }
            let pivot_row = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i == r || row[c].is_zero() {
                    continue;
                }
                let f = row[c];
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x = self.add(*x, self.mul(f, *p));
                }
            }
            pivots.push(c);
            r += 1;
            if r == rows.len() {
                break;
            }
        }
        pivots
    }

    pub fn rank(&self, m: &FieldMatrix) -> Result<usize, FieldError> {
        self.same_field(m)?;
        let mut rows = m.row_vecs();
        Ok(self.reduce(&mut rows, m.cols).len())
    }

    /// Solves a square system `a x = b`.
    pub fn solve(&self, a: &FieldMatrix, b: &[Gf]) -> Result<Solve, FieldError> {
        self.same_field(a)?;
        self.check_vec(b)?;
        if a.rows != a.cols || b.len() != a.rows {
            return Err(FieldError::Shape(format!(
                "{}x{} system with {} right-hand sides",
                a.rows,
                a.cols,
                b.len()
            )));
        }
        let mut rows = a.augmented(b);
        let pivots = self.reduce(&mut rows, a.cols);
        if pivots.len() < a.cols {
            return Ok(Solve::Singular);
        }
        Ok(Solve::Unique(rows.iter().map(|r| r[a.cols]).collect()))
    }

    /// Value of unknown `col` in a consistent system `a x = b` when every
    /// solution agrees on it, otherwise `None`.
    pub fn solve_coordinate(
        &self,
        a: &FieldMatrix,
        b: &[Gf],
        col: usize,
    ) -> Result<Option<Gf>, FieldError> {
        self.same_field(a)?;
        self.check_vec(b)?;
        if b.len() != a.rows || col >= a.cols {
            return Err(FieldError::Shape(format!(
                "{}x{} system, {} right-hand sides, unknown {col}",
                a.rows,
                a.cols,
                b.len()
            )));
        }
        // Move the target unknown last: after reduction it is determined
        // exactly when it carries a pivot.
        let order: Vec<usize> = (0..a.cols).filter(|&c| c != col).chain([col]).collect();
        let mut rows: Vec<Vec<Gf>> = (0..a.rows)
            .map(|i| {
                let mut r: Vec<Gf> = order.iter().map(|&c| a.get(i, c)).collect();
                r.push(b[i]);
                r
            })
            .collect();
        let pivots = self.reduce(&mut rows, a.cols);
        Ok(pivots
            .iter()
            .position(|&p| p == a.cols - 1)
            .map(|r| rows[r][a.cols]))
    }

    /// Solves `sum_l points[l]^k x_l = rhs[k]` for `k = 0..n` in O(n^2)
    /// through the Lagrange basis of the evaluation points.
    pub fn solve_vandermonde(&self, points: &[Gf], rhs: &[Gf]) -> Result<Vec<Gf>, FieldError> {
        let n = points.len();
        self.check_vec(points)?;
        self.check_vec(rhs)?;
        if rhs.len() != n {
            return Err(FieldError::Shape(format!("{n} points with {} right-hand sides", rhs.len())));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        // master[k] is the coefficient of x^k in prod (x + points[l]).
        let mut master = vec![Gf::ZERO; n + 1];
        master[0] = Gf::ONE;
        for (deg, &p) in points.iter().enumerate() {
            for k in (0..=deg + 1).rev() {
                let shifted = if k > 0 { master[k - 1] } else { Gf::ZERO };
                master[k] = self.add(shifted, self.mul(master[k], p));
            }
        }
        let mut out = Vec::with_capacity(n);
        for &p in points {
            // Synthetic division of the master polynomial by (x + p).
            let mut quotient = vec![Gf::ZERO; n];
            let mut carry = master[n];
            for k in (0..n).rev() {
                quotient[k] = carry;
                carry = self.add(master[k], self.mul(carry, p));
            }
            let denom = quotient
                .iter()
                .rev()
                .fold(Gf::ZERO, |acc, &c| self.add(self.mul(acc, p), c));
            if denom.is_zero() {
                return Err(FieldError::RepeatedPoint);
            }
            let numer = quotient
                .iter()
                .zip(rhs)
                .fold(Gf::ZERO, |acc, (&c, &r)| self.add(acc, self.mul(c, r)));
            out.push(self.div(numer, denom)?);
        }
        Ok(out)
    }

    pub fn mat_vec(&self, a: &FieldMatrix, x: &[Gf]) -> Result<Vec<Gf>, FieldError> {
        self.same_field(a)?;
        if x.len() != a.cols {
            return Err(FieldError::Shape(format!("{}x{} times {}", a.rows, a.cols, x.len())));
        }
        Ok((0..a.rows)
            .map(|i| {
                (0..a.cols).fold(Gf::ZERO, |acc, j| self.add(acc, self.mul(a.get(i, j), x[j])))
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solve {
    Unique(Vec<Gf>),
    Singular,
}

/// Shift-and-XOR product reduced by the field polynomial.
pub fn mul_shift_xor(mut a: u32, mut b: u32, spec: FieldSpec) -> u32 {
    let top = 1u32 << spec.bits;
    let mut acc = 0u32;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= spec.poly;
        }
    }
    acc
}

fn multiplicative_order(g: u32, spec: FieldSpec) -> usize {
    let mut x = g;
    let mut k = 1;
    while x != 1 {
        x = mul_shift_xor(x, g, spec);
        k += 1;
        if k > spec.order() as usize {
            return 0;
        }
    }
    k
}

/// Dense row-major matrix tagged with the field it lives in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMatrix {
    pub spec: FieldSpec,
    pub rows: usize,
    pub cols: usize,
    data: Vec<Gf>,
}

impl FieldMatrix {
    pub fn zeros(spec: FieldSpec, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            spec,
            rows,
            cols,
            data: vec![Gf::ZERO; rows * cols],
        }
    }

    pub fn from_rows(field: &Field, rows: &[Vec<u32>]) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = FieldMatrix::zeros(field.spec(), rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(FieldError::Shape("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, field.elem(v)?);
            }
        }
        Ok(m)
    }

    pub fn get(&self, i: usize, j: usize) -> Gf {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Gf) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Gf] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<Gf>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    fn augmented(&self, b: &[Gf]) -> Vec<Vec<Gf>> {
        (0..self.rows)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.push(b[i]);
                r
            })
            .collect()
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> FieldMatrix {
        let mut m = FieldMatrix::zeros(self.spec, rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }
}
