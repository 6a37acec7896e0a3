//! Audio anti-spoofing via self-synthesis: generate pseudo-fake training
//! audio from bona fide recordings under a same-speaker constraint, train a
//! binary detector with a learnable reweighting loss, and evaluate with
//! standard detection metrics.

pub mod audio;
pub mod commands;
pub mod config;
pub mod detector;
pub mod error;
pub mod fixtures;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod synthesis;
pub mod training;
pub mod transforms;

pub use error::{Error, Result};
