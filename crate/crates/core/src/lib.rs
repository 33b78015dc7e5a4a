//! Energy-based continuous inverse optimal control.
//!
//! Expert trajectories are treated as samples from `p(u) ∝ exp(-C_θ(x, u))`
//! where the state sequence `x` is the deterministic rollout of the controls
//! `u`. The cost parameters are learned by alternating a synthesis step
//! (Langevin sampling, gradient descent or iLQR under the current cost) with
//! an analysis step that moves `θ` along the difference between the cost
//! gradients at synthesized and observed trajectories.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cost;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod features;
pub mod generator;
pub mod io;
pub mod learning;
pub mod multiagent;
pub mod nn;
pub mod problem;
pub mod rng;
pub mod sampler;
pub mod types;

pub use error::{Error, Result};
