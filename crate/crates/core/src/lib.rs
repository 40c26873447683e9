//! Normalized maximum likelihood (NML) and renormalized maximum likelihood
//! (RNML) code-lengths for exponential-family models and Gaussian mixtures,
//! and their use in choosing the number of clusters.
//!
//! All code-lengths are in nats.

pub mod complexity;
pub mod criteria;
pub mod em;
pub mod error;
pub mod exp_family;
pub mod gaussian;
pub mod harness;
pub mod io;
pub mod rng;
pub mod selection;
pub mod special;

pub use error::{Error, Result};

/// A code-length in nats. May be `+∞` for data outside a model's support.
pub type CodeLength = f64;
