//! Exact combinatorics of tropical Lagrangian multi-sections over a polyhedral
//! base, the monomial gluing data they carry, the obstruction to gluing, the
//! glued sheaf descriptor, and the reverse construction.

pub mod base;
pub mod cover;
pub mod equiv;
pub mod error;
pub mod extract;
pub mod fixtures;
pub mod glue;
pub mod kaneyama;
pub mod lattice;
pub mod monomial;
pub mod mult;
pub mod obstruction;
pub mod report;

pub use error::{Error, LatticeError, Result};
