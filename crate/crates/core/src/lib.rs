//! Hanging-tether modelling and planning for a UGV and a UAV joined by a
//! variable-length tether.
//!
//! The crate is organised bottom-up:
//!
//! - [`curves`]: parabola and catenary models in a vertical plane, their
//!   lengths and areas, and the parabola to catenary fitting methods.
//! - [`decision`]: the parabola decision problem over polygonal obstacles,
//!   the sampled catenary baseline, obstacle inflation and re-checking.
//! - [`environment`]: occupancy grid with an exact Euclidean distance field,
//!   traversable ground extraction and vertical-plane slicing.
//! - [`planner`]: RRT* over coupled UGV/UAV positions with tether validation.
//! - [`optimizer`]: least-squares trajectory optimization with the tether
//!   curve parameters in the state vector.

pub mod curves;
pub mod decision;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod optimizer;
pub mod planner;

pub use error::{Error, Result};
pub use geometry::{Point2, Vec3};
