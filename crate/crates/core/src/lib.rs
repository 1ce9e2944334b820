//! Bootstrap-robust portfolio optimization and trading-strategy tuning.
//!
//! The pipeline runs from price CSVs ([`panel`]) through block bootstrap
//! resampling ([`resample`]) and per-replicate moment estimates
//! ([`estimate`]) to the optimizers in [`optimize`]. [`strategy`] and
//! [`evaluate`] backtest time-series momentum and score it, and
//! [`harness`] wires everything into the two end-to-end experiments that
//! the [`cli`] exposes.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod harness;
pub mod optimize;
pub mod panel;
pub mod resample;
pub mod special;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
