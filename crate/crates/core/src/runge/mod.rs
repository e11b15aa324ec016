//! Constructive polynomial approximation in one complex variable.
//!
//! Targets are given piecewise by polynomials on disjoint closed rectangles and disks.
//! Approximants are found by least squares over boundary and interior samples with
//! degree escalation, and their sup error is re-measured on a finer validation grid.

mod fit;
mod polynomial;
mod region;

pub use fit::{
    birkhoff_pair, fit_polynomial, separating_polynomial, ApproxReport, DegreeAttempt, FitMethod,
    FitOptions, Piece, PiecewiseTarget,
};
pub use polynomial::{ComplexPolynomial, Evaluator};
pub use region::Region;
