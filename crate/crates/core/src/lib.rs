//! Ground-aware lidar odometry: cluster-based ground extraction, range-image
//! segmentation, edge/planar features and two-step LM registration, with a
//! synthetic scan generator and drift evaluation.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod eval;
pub mod feature;
pub mod ground;
pub mod lidar_model;
pub mod mapping;
pub mod pipeline;
pub mod register;
pub mod segment;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use lidar_model::{PointCloud, RangeImage, SensorModel};
pub use register::RigidTransform;

pub type Point = nalgebra::Point3<f64>;
