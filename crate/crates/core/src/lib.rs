//! Zero-inflated Skellam score-driven volatility models for transaction-level
//! price changes, with tick cleaning, intraday adjustment, estimation,
//! diagnostics and realized measures.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod gasfilter;
pub mod realized;
pub mod simulator;
pub mod smoothing;
pub mod tickstore;
pub mod ziskellam;

pub use error::{Error, Result};
pub use estimator::{FitOptions, FitResult};
pub use gasfilter::{FilterOutput, ModelInput, ModelParams, ModelSpec, Variant};
pub use simulator::SimConfig;
pub use smoothing::AdjustmentCurves;
pub use tickstore::{CleaningConfig, Tick, TickDay};
