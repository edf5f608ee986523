//! Information-based multi-robot source seeking.
//!
//! Mobile sensors take isotropic range measurements of a source, estimate its
//! position with a (consensus) extended Kalman filter and move along the
//! gradient of a Fisher-information loss. Centralized and fully distributed
//! variants are provided together with the experiment harness used to run
//! seeded Monte Carlo batches.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod estimation;
pub mod information;
pub mod measurement;
pub mod network;
pub mod output;
pub mod rng;
pub mod scenarios;
pub mod simulation;

pub use error::{Error, Result};
