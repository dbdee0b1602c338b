//! Return kernels, exact bridge samplers and range statistics for random
//! walks on integer lattices, regular trees and lamplighter groups.

pub mod bridge;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod numeric;
pub mod range_stats;
pub mod rng;
pub mod walk_models;

pub use error::{Error, Result};
pub use walk_models::{make_model, ModelKind, ModelSpec, Vertex, WalkModel};
