//! Building blocks for constructing holomorphic maps with dense orbits.
//!
//! The crate is organised bottom-up:
//!
//! * [`solenoid`] models the compact solenoid group and its translation action.
//! * [`runge`] fits polynomials to piecewise-polynomial targets on disjoint compact sets.
//! * [`construction`] runs the staged construction of a cocycle on the solenoid.
//! * [`polyconvex`] decomposes unions of unit cubes into polynomially separated boxes.
//! * [`towers`] handles nested Rokhlin-type towers for free actions.
//!
//! Geometry is carried out in exact rational arithmetic ([`exact`]); fitting uses
//! double-double least squares ([`numeric`]).

pub mod construction;
pub mod error;
pub mod exact;
pub mod numeric;
pub mod polyconvex;
pub mod runge;
pub mod solenoid;
pub mod towers;

pub use error::{Error, Result};
