//! Spatial rough-path lifts of the periodic additive stochastic heat
//! equation: the truncated tensor group, rough slices and sheets, a spectral
//! sampler, the exact covariance, dyadic approximation and large-deviation
//! diagnostics.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod convergence;
pub mod covariance;
pub mod dyadic;
pub mod error;
pub mod group;
pub mod ldp;
pub mod rough;
pub mod sampler;
pub mod scan;
pub mod stats;

pub use error::{Error, Result};
pub use group::{group_dist, GroupElement};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
