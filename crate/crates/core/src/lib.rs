//! Multipath models of the in-room radio channel: the exact mirror-source
//! lattice, its quadratic-rate Poisson approximation, closed-form delay
//! statistics and the Monte Carlo machinery that compares them.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod numerics;
pub mod pointprocess;
pub mod synthesis;
pub mod theory;

pub use error::{Error, Result};
