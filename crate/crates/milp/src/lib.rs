//! Small linear and mixed-integer programming engine.
//!
//! The simplex and the branch and bound are generic over [`LpScalar`], so the
//! same code runs on `f64` for speed and on [`BigRational`] when an exact
//! answer is needed to cross-check a float run.

pub mod branch;
pub mod lp_format;
pub mod problem;
pub mod scalar;
pub mod simplex;

pub use branch::{solve, Cut, Incumbent, MipOptions, MipOutcome, MipStatus, NoCuts, Separator};
pub use lp_format::write_lp;
pub use num_rational::BigRational;
pub use problem::{Constraint, LinearProgram, RowId, Sense, VarId, VarKind, Variable};
pub use scalar::LpScalar;
pub use simplex::{DualSimplex, LpStatus};

pub type LinearProgramF64 = LinearProgram<f64>;
pub type ExactLinearProgram = LinearProgram<BigRational>;
pub type SimplexF64 = DualSimplex<f64>;
pub type ExactSimplex = DualSimplex<BigRational>;
pub type MipOutcomeF64 = MipOutcome<f64>;
pub type ExactMipOutcome = MipOutcome<BigRational>;
