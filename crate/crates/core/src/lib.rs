//! Model predictive task sampling for robust episodic meta-learning.
//!
//! A risk predictive model (DeepSet encoder to a Gaussian latent, MLP
//! decoder from latent and task identifier to adaptation risk) is trained
//! online on the risks the learner realizes each iteration, then used to
//! score a larger candidate pool so the learner only evaluates the tasks
//! it selects. Baseline samplers, a sinusoid benchmark, robustness
//! metrics, and an experiment harness are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffeng;
pub mod error;
pub mod eval;
pub mod harness;
pub mod learner;
pub mod rng;
pub mod rpm;
pub mod samplers;
pub mod selftest;
pub mod tasks;

pub use error::{Error, Result};
