//! Work-distribution thermometry toolkit.
//!
//! A probe qubit coupled to a many-body system records the characteristic
//! function of the work done by a quench. From forward and backward records the
//! Tasaki-Crooks relation ln[p_F(W)/p_B(−W)] = β(W − ΔF) fixes the inverse
//! temperature β and the free-energy difference ΔF.

pub mod bayes;
pub mod bogoliubov;
pub mod error;
pub mod freq;
pub mod harness;
pub mod measurement;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod tebd;

pub use error::{Error, Result};
