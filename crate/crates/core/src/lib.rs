//! Membership inference against classifiers using a contrastively trained
//! attack encoder, plus the classic posterior-based baselines.

pub mod baselines;
pub mod clmia;
pub mod data;
pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod target;

pub use error::{Error, Result};
