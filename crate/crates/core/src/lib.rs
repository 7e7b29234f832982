//! Non-neural core of visibility-aware keypoint pose estimation.
//!
//! The crate turns object-level annotations (pose, visible mask, mesh) into
//! per-keypoint visibility labels, derives a real-valued importance for every
//! keypoint with personalized PageRank over a k-NN keypoint graph, selects the
//! keypoints worth localizing, and recovers/evaluates poses with EPnP+RANSAC
//! and the usual ADD(-S) metrics. A small software rasterizer and scene
//! generator stand in for dataset ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod geometry;
pub mod importance;
pub mod localizer;
pub mod metrics;
pub mod pnp;
pub mod pose;
pub mod render;
pub mod selection;
pub mod symmetry;
pub mod visibility;

pub use camera::Camera;
pub use error::{Error, Result};
pub use geometry::{KeypointSet, Mesh, RotationSet};
pub use pose::Pose;

/// Three-component vector in meters (object or camera frame).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix, usually a rotation.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Continuous pixel coordinate (u, v).
pub type Pixel = nalgebra::Vector2<f64>;
