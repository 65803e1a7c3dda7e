//! Color-mismatch correction for stereoscopic image pairs.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod color;
pub mod config;
pub mod dataset;
pub mod distort;
pub mod error;
pub mod global;
pub mod idt;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod stats;
pub mod testimage;

pub use error::{Error, Result};
pub use image::{ImageBuffer, Stereopair};
