//! Meshfree neural-network solver for two-phase incompressible Navier-Stokes
//! flow with moving interfaces.
//!
//! Each phase is approximated by its own fully connected network. Training
//! minimizes a weighted sum of mean-squared residuals of the momentum and
//! continuity equations, the interface jump conditions, and the boundary and
//! initial data, all evaluated at sampled space-time points.

pub mod geometry;
pub mod harness;
pub mod loss;
pub mod net;
pub mod physics;
pub mod sampling;
pub mod tape;
pub mod trainer;
