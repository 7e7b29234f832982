//! Per-keypoint visibility labels from object-level annotations.
//!
//! A keypoint is visible when it is neither hidden by other objects
//! (external term, read from the visible mask) nor self-occluded (internal
//! term, a back-face test of its normal against the direction to the
//! camera). The ray-cast oracle measures how far the back-face test is from
//! the geometric truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{segment_blocked, RAY_EPSILON};
use crate::render::{MaskImage, Scene};
use crate::{Camera, Error, KeypointSet, Pixel, Pose, Result, Vec3};

/// Perspective projection of an object-frame point.
pub fn project(camera: &Camera, pose: &Pose, point: &Vec3) -> Result<Pixel> {
    camera.project_camera(&pose.transform_point(point))
}

/// Mask membership of each projected keypoint (nearest pixel).
///
/// Keypoints behind the camera or projecting outside the image are flagged
/// invisible.
pub fn external_visibility(keypoints: &KeypointSet, pose: &Pose, camera: &Camera, mask: &MaskImage) -> Result<Vec<bool>> {
    if !mask.matches(camera) {
        return Err(Error::invalid(format!("mask is {}x{}, camera is {}x{}", mask.width, mask.height, camera.width, camera.height)));
    }
    Ok(keypoints
        .points
        .iter()
        .map(|p| project(camera, pose, p).ok().and_then(|px| camera.pixel_index(&px)).is_some_and(|(x, y)| mask.get(x, y)))
        .collect())
}

/// `(-(R p + t)) · (R n)` for every keypoint.
pub fn facing_products(keypoints: &KeypointSet, pose: &Pose) -> Vec<f64> {
    keypoints.points.iter().zip(&keypoints.normals).map(|(p, n)| (-pose.transform_point(p)).dot(&pose.transform_vector(n))).collect()
}

/// Cosine between the unit direction to the camera and the normal.
pub fn facing_cosines(keypoints: &KeypointSet, pose: &Pose) -> Vec<f64> {
    keypoints
        .points
        .iter()
        .zip(&keypoints.normals)
        .map(|(p, n)| {
            let d = -pose.transform_point(p);
            let len = d.norm();
            if len > 0.0 {
                d.dot(&pose.transform_vector(n)) / len
            } else {
                0.0
            }
        })
        .collect()
}

/// Back-face test: visible iff the normal strictly faces the camera.
pub fn internal_visibility(keypoints: &KeypointSet, pose: &Pose) -> Vec<bool> {
    facing_products(keypoints, pose).into_iter().map(|v| v > 0.0).collect()
}

/// Elementwise AND of the two terms.
pub fn overall_visibility(v_ex: &[bool], v_in: &[bool]) -> Result<Vec<bool>> {
    if v_ex.len() != v_in.len() {
        return Err(Error::invalid(format!("visibility lengths differ: {} vs {}", v_ex.len(), v_in.len())));
    }
    Ok(v_ex.iter().zip(v_in).map(|(a, b)| *a && *b).collect())
}

/// Binary labels in keypoint order; serialized as 0/1 arrays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityLabels {
    #[serde(with = "bits")]
    pub v_ex: Vec<bool>,
    #[serde(with = "bits")]
    pub v_in: Vec<bool>,
    #[serde(with = "bits")]
    pub v: Vec<bool>,
}

impl VisibilityLabels {
    pub fn from_terms(v_ex: Vec<bool>, v_in: Vec<bool>) -> Result<Self> {
        let v = overall_visibility(&v_ex, &v_in)?;
        Ok(VisibilityLabels { v_ex, v_in, v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn visible_count(&self) -> usize {
        self.v.iter().filter(|b| **b).count()
    }

    /// Checks `v == v_ex AND v_in` and equal lengths.
    pub fn validate(&self) -> Result<()> {
        if overall_visibility(&self.v_ex, &self.v_in)? != self.v {
            return Err(Error::invalid("v is not the AND of v_ex and v_in"));
        }
        Ok(())
    }
}

/// Labels for one annotated image.
pub fn label_keypoints(keypoints: &KeypointSet, pose: &Pose, camera: &Camera, mask: &MaskImage) -> Result<VisibilityLabels> {
    let v_ex = external_visibility(keypoints, pose, camera, mask)?;
    let v_in = internal_visibility(keypoints, pose);
    VisibilityLabels::from_terms(v_ex, v_in)
}

/// Ray-cast ground truth for keypoints on the scene's target mesh.
///
/// A keypoint is visible iff the segment from the keypoint, lifted by
/// [`RAY_EPSILON`] along its normal, to the camera center crosses no
/// triangle of any scene entry (the target included).
pub fn oracle_visibility(keypoints: &KeypointSet, scene: &Scene) -> Vec<bool> {
    let pose = scene.target().pose;
    keypoints
        .points
        .par_iter()
        .zip(keypoints.normals.par_iter())
        .map(|(p, n)| {
            let start = pose.transform_point(&(p + n * RAY_EPSILON));
            !scene.entries.iter().any(|e| segment_blocked(&e.mesh, &e.pose, &start, &Vec3::zeros()))
        })
        .collect()
}

/// Fraction of positions where the two label vectors agree.
pub fn labeling_accuracy(predicted: &[bool], oracle: &[bool]) -> Result<f64> {
    if predicted.len() != oracle.len() {
        return Err(Error::invalid("label lengths differ"));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("cannot score empty label vectors"));
    }
    let agree = predicted.iter().zip(oracle).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / predicted.len() as f64)
}

mod bits {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&b| b as u8).collect::<Vec<u8>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!("visibility flag must be 0 or 1, got {other}"))),
            })
            .collect()
    }
}
