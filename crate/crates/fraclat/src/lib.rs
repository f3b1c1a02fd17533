//! Piecewise-affine finite elements on shifted Freudenthal lattices, with the
//! discrete bulk/surface energies, good/bad cell construction and convergence
//! harness for fracture-type energies with p-growth.

pub mod geom;
pub mod lattice;
pub mod quad;
pub mod fields;
pub mod sym;
