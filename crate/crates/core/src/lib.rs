//! Shape-aware forecasting toolkit: TILDE-Q and baseline losses with
//! analytic gradients, alignment metrics, distortion generators, and a
//! small sequence-to-sequence GRU forecaster trained by a matrix tape.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the
//! experiment runner and the command line live in the companion `tildeq`
//! crate.

#![no_std]
// NaN must fail range checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod distortions;
pub mod error;
pub mod gru;
pub mod losses;
pub mod metrics;
pub mod series;
pub mod spectral;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use series::{ForecastPair, Series};
