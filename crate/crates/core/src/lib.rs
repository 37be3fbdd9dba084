//! Sensitivity-guided adaptive learning rates.
//!
//! Each parameter's learning rate is the schedule's base rate scaled by
//! `(U + eps) / (Î + eps)`, where `Î` is a moving average of the parameter's
//! sensitivity `|theta * g|` and `U = |I - Î|` its local temporal variation.
//! Parameters whose sensitivity is low and stable (redundant ones) get larger
//! steps; highly sensitive ones are slowed down.
//!
//! Modules:
//!
//! - [`nn`]: dense MLP with exact backprop and a finite-difference oracle
//! - [`schedule`]: constant, linear warmup/decay, inverse square root
//! - [`sensitivity`]: sensitivity, its moving average, variation, modulation
//! - [`optim`]: SGD / momentum / Adam / Adamax with optional modulation
//! - [`analysis`]: snapshots, one-shot pruning, overlap, traces, block scores
//! - [`data`]: spiral and blob generators, CSV ingestion
//! - [`harness`]: config-driven training runs, sweeps and exports

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod schedule;
pub mod sensitivity;

pub use error::{Result, SageError};
