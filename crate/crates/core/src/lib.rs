//! Perceptual scheduling of super-resolution variants: attenuation
//! profiling, CSF-weighted contrast analysis and per-patch variant
//! selection for images and video.

pub mod cli;
pub mod config;
pub mod contrast;
pub mod corpus;
pub mod csf;
pub mod error;
pub mod motion;
pub mod raster;
pub mod scheduler;
pub mod spectral;
pub mod viewing;

pub use error::{Error, Result};
