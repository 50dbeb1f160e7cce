//! Executable Peano existence theory for scalar and vector initial value
//! problems `y' = f(t, y)`, `y(t0) = y0`.
//!
//! The crate builds Tonelli and Euler-Cauchy approximate solutions together
//! with a certified residual, approximates the least and greatest solutions
//! of scalar problems with a ladder of perturbed problems, and checks or
//! brackets candidates against lower and upper solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod corpus;
pub mod extremal;
pub mod gridfn;
pub mod integrators;
pub mod problem;
pub mod residual;
pub mod rhs_lang;

pub use bounds::{BoundCertificate, BoundKind};
pub use corpus::CorpusEntry;
pub use extremal::{ExtremalResult, Side};
pub use gridfn::GridFunction;
pub use integrators::TonelliParams;
pub use problem::{DomainBox, IvpProblem};
pub use residual::ResidualReport;
pub use rhs_lang::Expr;

/// Formats a float with the shortest decimal text that parses back to the
/// same value. Plain notation for moderate magnitudes, exponent otherwise.
pub fn fmt_f64(x: f64) -> String {
    let magnitude = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&magnitude) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Max norm `max_j |x_j|`.
pub fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
