//! Counterfactual sampling for temporal point processes.
//!
//! Every thinning decision is modelled as a binary Gumbel-Max structural
//! causal model. Given the factual accept/reject trace of a thinning run and
//! an alternative intensity, the crate samples the events that would have
//! been accepted had the intensity been different, holding the noise fixed.

// `!(x > y)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf_poisson;
pub mod error;
pub mod experiments;
pub mod gumbel_scm;
pub mod hawkes;
pub mod intensity;
pub mod io;
pub mod randomness;
pub mod sir;
pub mod stats;
pub mod thinning;
pub mod validate;

pub use error::{Error, Result};
