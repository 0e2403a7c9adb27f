#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod netcore;
pub mod rng;

pub use error::{GeeseError, Result};
pub mod evaluators;
pub mod surrogate;
pub mod generators;
pub mod geese;
pub mod baselines;
pub mod harness;
