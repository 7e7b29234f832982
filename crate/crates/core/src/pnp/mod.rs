//! Pose from 3D-2D correspondences: EPnP and a RANSAC wrapper.

mod epnp;
mod ransac;
mod refine;

pub use epnp::epnp;
pub use ransac::{ransac_pnp, RansacConfig};
pub use refine::refine_pose;

use serde::{Deserialize, Serialize};

use crate::{Camera, Error, Pixel, Pose, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub points3d: Vec<Vec3>,
    pub pixels2d: Vec<Pixel>,
}

impl CorrespondenceSet {
    pub fn new(points3d: Vec<Vec3>, pixels2d: Vec<Pixel>) -> Result<Self> {
        if points3d.len() != pixels2d.len() {
            return Err(Error::invalid(format!("{} points but {} pixels", points3d.len(), pixels2d.len())));
        }
        let finite = points3d.iter().all(|p| p.iter().all(|v| v.is_finite())) && pixels2d.iter().all(|p| p.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::invalid("correspondences must be finite"));
        }
        Ok(CorrespondenceSet { points3d, pixels2d })
    }

    pub fn len(&self) -> usize {
        self.points3d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points3d.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet {
            points3d: indices.iter().map(|&i| self.points3d[i]).collect(),
            pixels2d: indices.iter().map(|&i| self.pixels2d[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: Pose,
    pub inliers: Vec<bool>,
    /// Mean over inliers, pixels.
    pub mean_reprojection_error: f64,
}

impl PoseEstimate {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|v| **v).count()
    }
}

/// Pixel distance per correspondence; infinite when the point lies behind
/// the camera.
pub fn reprojection_errors(pose: &Pose, camera: &Camera, cs: &CorrespondenceSet) -> Vec<f64> {
    cs.points3d
        .iter()
        .zip(&cs.pixels2d)
        .map(|(p, px)| match camera.project_camera(&pose.transform_point(p)) {
            Ok(proj) => (proj - px).norm(),
            Err(_) => f64::INFINITY,
        })
        .collect()
}
