//! Hierarchical pinning model with hierarchically correlated Gaussian
//! disorder: pure recursion, quenched and annealed partition functions,
//! annealed critical points and disorder relevance diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealed;
pub mod disorder;
pub mod error;
pub mod lattice;
pub mod logdomain;
pub mod quenched;
pub mod relevance;
pub mod rng;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
