//! Explicit bounds on the expected supremum of empirical processes indexed
//! by VC-type function families, with exact small-sample oracles, Monte Carlo
//! estimators and chaining diagnostics to check them against.

// NaN must fail domain checks, so `!(x >= lo)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chaining;
pub mod error;
pub mod families;
pub mod montecarlo;
pub mod numeric;
pub mod sample;
pub mod sets;
pub mod shatter;

pub use error::{Error, Result};
