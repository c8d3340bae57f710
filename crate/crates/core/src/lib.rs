//! Distributed gradient projection for demand response.
//!
//! Smart loads sharing a communication graph estimate the grid's
//! consumption-generation mismatch from their own noisy frequency
//! measurements and exchange only disutility gradients with neighbors. The
//! crate contains the agent update law, a grid and estimator model to close
//! the loop, a dual-decomposition baseline, a centralized oracle, a
//! projected-ODE reference, and a simulation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dgp;
pub mod disutility;
pub mod dual;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod ode;
pub mod oracle;
pub mod plant;
pub mod rng;

pub use disutility::{DisutilitySpec, Family};
pub use error::{Error, Result};
pub use graph::GraphTopology;
