//! Hyperspectral image classification with spectral supertokens.

pub mod classifier;
pub mod cluster;
pub mod cube;
pub mod derivative;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod labels;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
