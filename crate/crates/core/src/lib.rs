//! Expectation fields of Wiener-shifted inviscid flows on the flat torus.
//!
//! The crate solves inviscid reference flows (the Hopf equation and 2D
//! incompressible Euler), perturbs their Lagrangian maps by a torus-wide
//! Brownian translation, forms expectation fields and measures how well
//! those fields satisfy the Burgers, Reynolds-type and Navier–Stokes
//! equations, against independent viscous reference solvers.

pub mod ensemble;
pub mod error;
pub mod inviscid;
pub mod mean_fields;
pub mod oracles;
pub mod runner;
pub mod stochastic;
pub mod torus;

pub use error::{Error, Result};
