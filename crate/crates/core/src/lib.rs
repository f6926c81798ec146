//! Profiling toolkit for EV charging sessions.
//!
//! The pipeline runs: [`ingest`] → [`signal`] filtering → [`tail`]
//! extraction → [`features`] → [`learn`] classifiers, with [`experiments`]
//! reproducing the balanced one-vs-all and multi-class studies and [`synth`]
//! generating labelled sessions with known ground truth.

pub mod config;
pub mod error;
pub mod experiments;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod rng;
pub mod series;
pub mod signal;
pub mod synth;
pub mod tail;

pub use error::{Error, Result};
pub use series::TimeSeries;
