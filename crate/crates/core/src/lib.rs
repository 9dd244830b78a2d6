//! Scenario reduction for discrete probability distributions under the
//! type-`l` Wasserstein distance.
//!
//! The crate is organised bottom-up:
//!
//! - [`distribution`]: the shared value types ([`DiscreteDistribution`],
//!   [`Metric`], [`Partition`], [`ReductionResult`]) and validation.
//! - [`geometry`]: ground-norm costs and per-cell centroid solvers.
//! - [`transport`]: exact Wasserstein distances (transportation simplex) and
//!   the closed form for a fixed support set.
//! - [`heuristics`]: greedy forward selection, generalized k-means, swap local
//!   search and the continuous polish step.
//! - [`exact`]: enumeration-based exact reducers and mixed-integer model export.
//! - [`limits`]: closed-form worst-case bounds and the tight/adversarial
//!   instance generators.
//! - [`quantize`]: color quantization of RGB images.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod heuristics;
pub mod limits;
pub mod quantize;
pub mod transport;

mod numfmt;

pub use distribution::{
    validate, DiscreteDistribution, Metric, Norm, Partition, ReductionResult, ValidationOptions, Violation,
};
pub use error::{Error, Result};
pub use numfmt::format_g17;
