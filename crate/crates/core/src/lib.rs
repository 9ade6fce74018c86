//! Simulation and analysis of continuously monitored Markovian open quantum
//! systems: quantum-jump trajectories, monitoring-operator Fisher information
//! and multidimensional kinetic/thermodynamic uncertainty bounds.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod monitoring;
pub mod statistics;
pub mod thermo;
pub mod trajectory;

pub use error::{Error, Result};
