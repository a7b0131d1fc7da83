//! Two-aircraft horizontal encounter model, trusted resolution logic, and
//! an offline approximate-dynamic-programming pipeline that tunes the
//! resolution logic's separation parameter online through a post-decision
//! value function.

pub mod adp;
pub mod artifact;
pub mod config;
pub mod export;
pub mod error;
pub mod eval;
pub mod features;
pub mod geom;
pub mod lstsq;
pub mod mdp;
pub mod noise;
pub mod pareto;
pub mod policy;
pub mod trl;

pub use error::{Error, Result};
