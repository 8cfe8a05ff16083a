//! Per-node protocol primitives: encoding on both protection signals,
//! decoding at a connection endpoint, and the dimensioning bounds for
//! round numbers and buffers.

use serde::{Deserialize, Serialize};

use crate::analysis::local_system;
use crate::coding::{structural_rank, CoefficientMatrix, FailurePattern};
use crate::galois::{Field, FieldError, Gf};

/// What one endpoint adds to a protection signal: `alpha * (local + received)`
/// where `local` is the unit it generated and `received` the unit its
/// partner's working path delivered.
pub fn contribution(field: &Field, alpha: Gf, local: Gf, received: Gf) -> Gf {
    field.mul(alpha, field.add(local, received))
}

/// Encoding at a source-side node: both incoming signals gain
/// `alpha * (d + u_hat)`.
pub fn encode_at_s(field: &Field, incoming: (Gf, Gf), alpha: Gf, d: Gf, u_hat: Gf) -> (Gf, Gf) {
    let c = contribution(field, alpha, d, u_hat);
    (field.add(incoming.0, c), field.add(incoming.1, c))
}

/// Encoding at a sink-side node: both incoming signals gain
/// `alpha * (d_hat + u)`.
pub fn encode_at_t(field: &Field, incoming: (Gf, Gf), alpha: Gf, d_hat: Gf, u: Gf) -> (Gf, Gf) {
    let c = contribution(field, alpha, u, d_hat);
    (field.add(incoming.0, c), field.add(incoming.1, c))
}

/// One protection equation seen by an endpoint: the sum of the two signals
/// arriving at its processing point on walk `walk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Equation {
    pub walk: usize,
    pub value: Gf,
}

#[derive(Clone, Debug)]
pub struct DecodeInput<'a> {
    pub conn: usize,
    /// Unit this endpoint generated for the round.
    pub own_data: Gf,
    /// Failed connections and walks of the round.
    pub pattern: &'a FailurePattern,
    /// One equation per walk protecting `conn`; failed walks are ignored.
    pub equations: &'a [Equation],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoded {
    /// The partner's unit for the round.
    Recovered(Gf),
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("C{}: enough equations but the coefficients leave the system singular", .conn + 1)]
    Singular { conn: usize },
    #[error("C{}: no equation from protecting walk P{}", .conn + 1, .walk + 1)]
    MissingEquation { conn: usize, walk: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Solves for the partner's contribution on the intact protecting walks.
///
/// Each equation equals `sum_l alpha(k, l) w_l` over this connection's
/// partner contribution and the contributions of the co-failed connections
/// on walk `k`. The partner's unit is its contribution minus what the
/// partner received from us, which is zero when our working path failed.
pub fn decode(field: &Field, coeffs: &CoefficientMatrix, input: &DecodeInput<'_>) -> Result<Decoded, DecodeError> {
    let system = local_system(&coeffs.mask, input.pattern, input.conn);
    let mut rhs = Vec::with_capacity(system.rows.len());
    for &k in &system.rows {
        let eq = input
            .equations
            .iter()
            .find(|e| e.walk == k)
            .ok_or(DecodeError::MissingEquation { conn: input.conn, walk: k })?;
        rhs.push(eq.value);
    }
    let col = system.cols.iter().position(|&l| l == input.conn).expect("own column");
    match field.solve_coordinate(&coeffs.submatrix(&system), &rhs, col)? {
        Some(w) => {
            let delivered = if input.pattern.connections.contains(&input.conn) {
                Gf::ZERO
            } else {
                input.own_data
            };
            Ok(Decoded::Recovered(field.add(w, delivered)))
        }
        None => {
            let mut reduced = system.clone();
            reduced.cols.remove(col);
            if structural_rank(&coeffs.mask, &system) == structural_rank(&coeffs.mask, &reduced) + 1 {
                Err(DecodeError::Singular { conn: input.conn })
            } else {
                Ok(Decoded::Insufficient)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("no working-path delays given")]
    NoWorkingDelays,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundBound {
    /// Protection-path delay in unit transmission times, rounded up.
    pub a: u64,
    /// Bits needed to number `2a` rounds.
    pub field_bits: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferBounds {
    /// Bound for the transmit buffer and both protection buffers.
    pub tx: u64,
    /// Bound for the working-path receive buffer.
    pub rx: u64,
}

fn positive(v: f64, what: &'static str) -> Result<f64, BoundError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(BoundError::NonPositive(what))
    }
}

/// `ceil(x)` that ignores representation error just above an integer.
fn ceil_units(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

pub fn round_number_bound(protection_delay: f64, unit_bits: f64, capacity: f64) -> Result<RoundBound, BoundError> {
    let unit_time = positive(unit_bits, "unit size")? / positive(capacity, "capacity")?;
    let a = ceil_units(positive(protection_delay, "protection delay")? / unit_time);
    let field_bits = (2 * a).next_power_of_two().trailing_zeros();
    Ok(RoundBound { a, field_bits })
}

pub fn buffer_bounds(
    protection_delay: f64,
    working_delays: &[f64],
    unit_bits: f64,
    capacity: f64,
) -> Result<BufferBounds, BoundError> {
    let unit_time = positive(unit_bits, "unit size")? / positive(capacity, "capacity")?;
    let p = positive(protection_delay, "protection delay")?;
    if working_delays.is_empty() {
        return Err(BoundError::NoWorkingDelays);
    }
    for &w in working_delays {
        positive(w, "working delay")?;
    }
    let max = working_delays.iter().copied().fold(f64::MIN, f64::max);
    let min = working_delays.iter().copied().fold(f64::MAX, f64::min);
    Ok(BufferBounds {
        tx: ceil_units((p + max) / unit_time),
        rx: ceil_units((p + max - min) / unit_time),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{assign_all_ones, assign_random, ProtectionMask};

    #[test]
    fn extreme_and_failed_encodings() {
        let f = Field::gf256();
        let (a, d, u) = (Gf(7), Gf(0x53), Gf(0xCA));
        let c = f.mul(a, f.add(d, u));
        assert_eq!(encode_at_s(&f, (Gf::ZERO, Gf::ZERO), a, d, u), (c, c));
        let y = Gf(0x11);
        assert_eq!(encode_at_s(&f, (y, y), a, d, Gf::ZERO).0, f.add(y, f.mul(a, d)));
        assert_eq!(encode_at_t(&f, (y, y), a, Gf::ZERO, u).1, f.add(y, f.mul(a, u)));
        assert_eq!(encode_at_t(&f, (y, y), Gf::ONE, d, u).0, Gf(0x11 ^ 0x53 ^ 0xCA));
    }

    #[test]
    fn single_walk_recovery_and_cross_check() {
        // Two connections on one walk; the other endpoints' contributions
        // cancel unless their connection failed.
        let f = Field::gf256();
        let coeffs = assign_random(&ProtectionMask::full(1, 2), &f, 3);
        let (d0, u0) = (Gf(10), Gf(20));
        let a0 = coeffs.alpha(0, 0);
        // Connection 0 failed: the sink contributed a0 * u0.
        let failed = FailurePattern::new([0], []);
        let eq = [Equation { walk: 0, value: f.mul(a0, u0) }];
        let input = DecodeInput { conn: 0, own_data: d0, pattern: &failed, equations: &eq };
        assert_eq!(decode(&f, &coeffs, &input).unwrap(), Decoded::Recovered(u0));
        // Healthy: the sink contributed a0 * (d0 + u0).
        let healthy = FailurePattern::default();
        let eq = [Equation { walk: 0, value: f.mul(a0, f.add(d0, u0)) }];
        let input = DecodeInput { conn: 0, own_data: d0, pattern: &healthy, equations: &eq };
        assert_eq!(decode(&f, &coeffs, &input).unwrap(), Decoded::Recovered(u0));
    }

    #[test]
    fn two_unknowns_one_equation_is_insufficient() {
        let f = Field::gf256();
        let coeffs = assign_all_ones(&ProtectionMask::full(1, 2), &f);
        let p = FailurePattern::new([0, 1], []);
        let eq = [Equation { walk: 0, value: Gf(5) }];
        let input = DecodeInput { conn: 0, own_data: Gf(1), pattern: &p, equations: &eq };
        assert_eq!(decode(&f, &coeffs, &input).unwrap(), Decoded::Insufficient);
    }

    #[test]
    fn equal_columns_are_reported_singular() {
        let f = Field::gf256();
        let coeffs = assign_all_ones(&ProtectionMask::full(2, 2), &f);
        let p = FailurePattern::new([0, 1], []);
        let eq = [Equation { walk: 0, value: Gf(5) }, Equation { walk: 1, value: Gf(5) }];
        let input = DecodeInput { conn: 1, own_data: Gf(1), pattern: &p, equations: &eq };
        assert_eq!(decode(&f, &coeffs, &input), Err(DecodeError::Singular { conn: 1 }));
        let input = DecodeInput { conn: 1, own_data: Gf(1), pattern: &p, equations: &eq[..1] };
        assert_eq!(decode(&f, &coeffs, &input), Err(DecodeError::MissingEquation { conn: 1, walk: 1 }));
    }

    #[test]
    fn round_bound_examples() {
        assert_eq!(round_number_bound(0.010, 1000.0, 1e6).unwrap(), RoundBound { a: 10, field_bits: 5 });
        assert_eq!(round_number_bound(0.001, 1000.0, 1e6).unwrap(), RoundBound { a: 1, field_bits: 1 });
        assert_eq!(round_number_bound(0.010, 1000.0, 2e6).unwrap().a, 20);
        assert_eq!(round_number_bound(0.0105, 1000.0, 1e6).unwrap().a, 11);
        assert!(round_number_bound(0.0, 1000.0, 1e6).is_err());
        assert!(round_number_bound(1.0, -1.0, 1e6).is_err());
    }

    #[test]
    fn buffer_bound_examples() {
        assert_eq!(buffer_bounds(10.0, &[2.0, 5.0], 1.0, 1.0).unwrap(), BufferBounds { tx: 15, rx: 13 });
        assert_eq!(buffer_bounds(10.0, &[3.0, 3.0], 1.0, 1.0).unwrap().rx, 10);
        assert_eq!(buffer_bounds(10.0, &[], 1.0, 1.0), Err(BoundError::NoWorkingDelays));
    }
}
