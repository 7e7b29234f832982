//! Visibility-aware keypoint selection and the multi-view keypoint merge.

use serde::{Deserialize, Serialize};

use crate::geometry::farthest_point_sampling_points;
use crate::importance::ImportanceVector;
use crate::visibility::internal_visibility;
use crate::{Error, KeypointSet, Mesh, Pose, Result};

pub const DEFAULT_FALLBACK_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_select: usize,
    pub fallback_ratio_threshold: f64,
}

impl SelectionConfig {
    /// `N′ = N/2` with the default fallback threshold.
    pub fn half_of(n: usize) -> Self {
        SelectionConfig { n_select: n / 2, fallback_ratio_threshold: DEFAULT_FALLBACK_RATIO }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_select == 0 || self.n_select > n {
            return Err(Error::invalid(format!("n_select {} must be in 1..={n}", self.n_select)));
        }
        if !(0.0..=1.0).contains(&self.fallback_ratio_threshold) {
            return Err(Error::invalid("fallback ratio threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Sorted ascending, unique.
    pub indices: Vec<usize>,
    pub used_fallback: bool,
}

/// Indices of the `n_select` largest importances, lower index first on ties.
pub fn select_top(r: &ImportanceVector, config: &SelectionConfig) -> Result<Selection> {
    config.validate(r.len())?;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r.r[b].total_cmp(&r.r[a]).then(a.cmp(&b)));
    let mut indices = order[..config.n_select].to_vec();
    indices.sort_unstable();
    Ok(Selection { indices, used_fallback: false })
}

/// Evenly spread subset: FPS over the keypoint coordinates from keypoint 0.
pub fn evenly_distributed(keypoints: &KeypointSet, n_select: usize) -> Result<Selection> {
    let mut indices = farthest_point_sampling_points(&keypoints.points, n_select, 0)?;
    indices.sort_unstable();
    Ok(Selection { indices, used_fallback: true })
}

/// Top-importance selection unless too few keypoints are visible (or no
/// importance is available), in which case the evenly spread subset is used.
pub fn select_with_fallback(visible: &[bool], r: Option<&ImportanceVector>, keypoints: &KeypointSet, config: &SelectionConfig) -> Result<Selection> {
    let n = keypoints.len();
    if visible.len() != n {
        return Err(Error::invalid(format!("{} visibility flags for {n} keypoints", visible.len())));
    }
    config.validate(n)?;
    let count = visible.iter().filter(|v| **v).count();
    let ratio = count as f64 / n as f64;
    match r {
        Some(r) if count > 0 && ratio >= config.fallback_ratio_threshold => {
            if r.len() != n {
                return Err(Error::invalid(format!("{} importances for {n} keypoints", r.len())));
            }
            select_top(r, config)
        }
        _ => evenly_distributed(keypoints, config.n_select),
    }
}

/// Keypoints sampled from several partial meshes, with the mesh each came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedKeypoints {
    pub keypoints: KeypointSet,
    pub origin: Vec<usize>,
}

/// For each mesh, FPS-samples `n / m` of the vertices passing the back-face
/// test under that mesh's view pose, then concatenates. Near-coincident
/// keypoints from different meshes are kept.
pub fn merge_multiview_keypoints(meshes: &[Mesh], poses: &[Pose], n: usize) -> Result<MergedKeypoints> {
    let m = meshes.len();
    if m == 0 || poses.len() != m {
        return Err(Error::invalid(format!("{m} meshes with {} view poses", poses.len())));
    }
    if n == 0 || !n.is_multiple_of(m) {
        return Err(Error::invalid(format!("N = {n} is not a positive multiple of m = {m}")));
    }
    let per = n / m;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut source_indices = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for (j, (mesh, pose)) in meshes.iter().zip(poses).enumerate() {
        let visible = internal_visibility(&mesh.all_vertices_as_keypoints(), pose);
        let idx: Vec<usize> = visible.iter().enumerate().filter_map(|(i, v)| v.then_some(i)).collect();
        if idx.len() < per {
            return Err(Error::invalid(format!("mesh {j} has {} visible vertices, {per} needed", idx.len())));
        }
        let pts: Vec<_> = idx.iter().map(|&i| mesh.vertices()[i]).collect();
        for k in farthest_point_sampling_points(&pts, per, 0)? {
            let v = idx[k];
            points.push(mesh.vertices()[v]);
            normals.push(mesh.normals()[v]);
            source_indices.push(v);
            origin.push(j);
        }
    }
    Ok(MergedKeypoints { keypoints: KeypointSet { points, normals, source_indices }, origin })
}
