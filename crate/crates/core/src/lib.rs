//! Selecting information sources so that a Bayesian learner ends up
//! confident only among hypotheses it can afford to confuse.
//!
//! Each instance pairs a hypothesis set and a penalty matrix (how costly it
//! is to mistake one hypothesis for another) with a set of priced sources.
//! Sources that cannot separate two hypotheses leave the learner's belief
//! spread over them, so a source set is judged by the worst or total penalty
//! left inside each hypothesis' indistinguishable set.
//!
//! * [`model`]: instances, validation, divergence helpers.
//! * [`equiv`]: indistinguishable hypothesis sets.
//! * [`metrics`]: per-hypothesis scores, potentials, submodularity ratios.
//! * [`bayes`]: belief updates, simulation, sample complexity.
//! * [`solvers`]: greedy and exhaustive selection with guarantees.
//! * [`expgen`]: random instance generation and batch experiments.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod bitset;
pub mod cli;
pub mod equiv;
pub mod error;
pub mod expgen;
pub mod fixtures;
pub mod metrics;
pub mod model;
pub mod solvers;

pub use error::{Error, Result};
