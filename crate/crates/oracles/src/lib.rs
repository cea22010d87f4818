//! Slow, obviously-correct reference models for differential testing.
//!
//! Nothing here depends on the production crate.

pub mod montecarlo;
pub mod naive_pd;
pub mod shadow;

pub use montecarlo::{balls_into_bins_mc, McResult, MonteCarloConfig};
pub use naive_pd::{NaivePd, NaivePdOp, NaivePdResult};
pub use shadow::{ShadowPrefixFilter, ShadowRoute};
