//! Globally consistent LiDAR mapping with voxelized GICP matching cost factors.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod clock;
pub mod cloud;
pub mod config;
pub mod error;
pub mod eval;
pub mod factors;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod kernel;
pub mod mapping;
pub mod par;
pub mod pipeline;
pub mod se3;
pub mod synthetic;
pub mod voxelmap;

pub use error::{Error, Result};
