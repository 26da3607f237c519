//! Solvers for stochastic optimal control of the 1-D heat equation on a
//! truncated halfline with Dirichlet boundary noise and boundary control.
//!
//! The state lives in a weighted L² space discretized on a grid
//! ([`weighted_space`]). The Dirichlet Laplacian, its analytic semigroup,
//! fractional powers and the boundary operator are realized spectrally
//! ([`dirichlet_heat`]). Forward dynamics are sampled in mild form
//! ([`forward_sde`]), costs and the Hamiltonian live in [`cost_model`],
//! backward equations are solved by least-squares Monte Carlo regression
//! ([`bsde`]), and [`hjb_control`] assembles the value function, the
//! optimal feedback law and the verification harnesses. [`experiment`]
//! provides the reproducible configuration / manifest layer used by the
//! `boundary-hjb` binary.

pub mod bsde;
pub mod cost_model;
pub mod dirichlet_heat;
pub mod error;
pub mod experiment;
pub mod forward_sde;
pub mod hjb_control;
pub mod weighted_space;

pub use error::{Error, Result};
