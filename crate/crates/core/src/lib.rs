//! Simulation and verification of measurement-based feedback stabilization of
//! GHZ states for multi-qubit systems.

pub mod analysis;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod oracle;
pub mod qmat;
pub mod reachability;
pub mod scenario;
pub mod tolerance;

pub use error::{Error, Result};
