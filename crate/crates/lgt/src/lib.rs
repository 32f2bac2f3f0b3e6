//! Numerical toolkit for truncated lattice gauge theory on U(1) and SU(2):
//! group-element arithmetic and quadrature, truncated link Hilbert spaces,
//! classical curvature interpolation, gauge-graph states and deformations,
//! principal chiral chain solvers with quantum fine-graining, and the exact
//! interpolation-MERA ascending channel.

pub mod chain;
pub mod dmrg;
pub mod error;
pub mod graph;
pub mod group;
pub mod interp;
pub mod linkspace;
pub mod mera;

pub use error::LgtError;
