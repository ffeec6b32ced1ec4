//! Grasp planning over uncertain shape completions.
//!
//! A partial point cloud is voxelized and fed through a small 3D
//! convolutional occupancy network whose dropout layers stay active at
//! inference. Each stochastic pass yields one plausible completed shape.
//! Grasp candidates are planned on the mean shape, scored with wrench-space
//! quality metrics on every sample, and ranked by their average quality.
//!
//! Module map:
//!
//! - [`voxelgrid`]: occupancy grids, voxelization, Jaccard similarity, grid averaging
//! - [`dropoutnet`]: the completion network, its trainer and Monte-Carlo dropout sampling
//! - [`meshing`]: iso-surface extraction, ray casting, synthetic depth rendering
//! - [`wrench`]: friction cones, grasp wrench spaces, epsilon / volume metrics
//! - [`planner`]: candidate generation, grasp evaluation and robust ranking
//! - [`simlab`]: synthetic objects, partial views, the comparison experiment, statistics

pub mod dropoutnet;
pub mod error;
pub mod meshing;
pub mod planner;
pub mod rng;
pub mod simlab;
pub mod voxelgrid;
pub mod wrench;

pub use error::{Error, Result};

/// 3-vector in meters, world frame unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
