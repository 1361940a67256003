//! UAV target tracking in a cluttered urban arena with a DQN agent.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod qnet;
pub mod reward;

pub use error::{Error, Result};
