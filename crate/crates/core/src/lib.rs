//! Simulation and numerical verification for two-type mutually catalytic
//! branching random walks on `Z^d` and on periodic boxes.

pub mod error;
pub mod experiments;
pub mod fss;
pub mod kernels;
pub mod lattice;
pub mod moments;
pub mod offspring;
pub mod particle;
mod rate_tree;
pub mod sde;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::KernelTable;
pub use lattice::{Geometry, Lattice, Site};
pub use offspring::OffspringLaw;
