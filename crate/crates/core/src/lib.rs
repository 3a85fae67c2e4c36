//! Evidential early-exit cascade networks for multi-event detection.
//!
//! A shared depthwise backbone is split into shallow, medium and deep stages.
//! Every stage carries one Beta-evidence head per event, so each exit yields
//! both a prediction and an uncertainty `u = 2 / (α + β)`. At inference a
//! sample leaves the cascade at the first stage whose uncertainty falls at or
//! below a threshold.

pub mod error;
pub mod eval;
pub mod evidential;
pub mod model;
pub mod numerics;
pub mod runtime;
pub mod signal;
pub mod train;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
