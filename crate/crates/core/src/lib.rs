//! Spectral analysis of Gibbs samplers on finite product spaces.

pub mod cli;
pub mod collapse;
pub mod error;
pub mod fixtures;
pub mod hierarchical;
pub mod operator;
pub mod report;
pub mod spectral;
pub mod target;
pub mod theorems;

pub use error::{Error, Result};
