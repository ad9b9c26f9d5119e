//! Deterministic augmentation and evaluation toolkit for line-level
//! handwriting recognition experiments.

pub mod augment;
pub mod cli;
pub mod ctcdecode;
pub mod error;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod stats;
pub mod textdata;

pub use error::{Error, Result};
pub use raster::GrayImage;
pub use rng::RngStream;
