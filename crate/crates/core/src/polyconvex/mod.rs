//! Exact cube and grid geometry: almost polynomially convex decompositions of unit cube
//! collections, and the separation certificates that make their convexity checkable.

mod boxes;
mod certificate;
mod decompose;
mod kallin;
mod lattice;

pub use boxes::{measure_of_box_union, RBox};
pub use certificate::{ReplayReport, Scope, SeparationCertificate, Separator, SplitStep};
pub use decompose::{
    certificate_replay, decompose, delta_for, per_cube_bound, DecompositionResult, Leaf, RetainedSubCube, Strip,
};
pub use kallin::{
    grid_sups, kallin_witness, product_union_certificate, product_union_replay, project, sample_grid, KallinWitness,
    ProductUnionCertificate, WitnessMethod,
};
pub(crate) use lattice::cartesian as cartesian_product;
pub use lattice::{grid_cube, grid_incidence, host_grid_cube, nearest_lattice, SubCubeIndex, UnitCube};
