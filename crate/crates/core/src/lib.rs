//! Torque-optimal trajectories on configuration spaces whose actuation cost
//! is measured by a cometric independent of the kinetic metric.

pub mod benchmarks;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fd;
pub mod geometry;
pub mod hamiltonian;
pub mod hyperdual;
pub mod solvers;
pub mod systems;
pub mod tensor;

pub use error::{Error, Result};
