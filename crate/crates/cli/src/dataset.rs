//! On-disk formats. Every file carries a `version` field; paths inside a
//! file are relative to the directory holding it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use viskp_core::importance::ImportanceVector;
use viskp_core::symmetry::SymmetrySpec;
use viskp_core::visibility::VisibilityLabels;
use viskp_core::{Camera, KeypointSet, Mat3, Pose, Vec3};

use crate::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

pub const MODELS_FILE: &str = "models.json";
pub const ANNOTATIONS_FILE: &str = "annotations.json";

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn check_version(path: &Path, version: u32) -> CliResult<()> {
    if version != FORMAT_VERSION {
        return Err(CliError::Data(format!("{}: unsupported format version {version}", path.display())));
    }
    Ok(())
}

pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    #[serde(rename = "K")]
    pub k: [f64; 9],
    pub width: u32,
    pub height: u32,
}

impl CameraRecord {
    pub fn from_camera(c: &Camera) -> Self {
        CameraRecord { k: [c.fx, 0.0, c.cx, 0.0, c.fy, c.cy, 0.0, 0.0, 1.0], width: c.width, height: c.height }
    }

    pub fn to_camera(&self) -> CliResult<Camera> {
        Ok(Camera::from_k(&Mat3::from_row_slice(&self.k), self.width, self.height)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(p: &Pose) -> Self {
        PoseRecord { r: p.rotation_row_major(), t: [p.translation.x, p.translation.y, p.translation.z] }
    }

    pub fn to_pose(&self) -> CliResult<Pose> {
        Ok(Pose::from_row_major(&self.r, &self.t)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub obj_id: u32,
    #[serde(flatten)]
    pub pose: PoseRecord,
    /// Visible-part mask, PGM.
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: u64,
    pub camera: CameraRecord,
    pub objects: Vec<ObjectAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
}

impl AnnotationRecord {
    pub fn object(&self, obj_id: u32) -> Option<&ObjectAnnotation> {
        self.objects.iter().find(|o| o.obj_id == obj_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationsFile {
    pub version: u32,
    pub target_obj_id: u32,
    pub images: Vec<AnnotationRecord>,
}

impl AnnotationsFile {
    /// Loads and validates cameras and rotations. Mask files are checked
    /// per image by the consumers so that one bad frame does not stop a run.
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: AnnotationsFile = read_json(path)?;
        check_version(path, file.version)?;
        for img in &file.images {
            img.camera.to_camera().map_err(|e| CliError::Data(format!("image {}: {e}", img.image_id)))?;
            for o in &img.objects {
                o.pose.to_pose().map_err(|e| CliError::Data(format!("image {} object {}: {e}", img.image_id, o.obj_id)))?;
            }
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub obj_id: u32,
    pub mesh: String,
    pub diameter: f64,
    #[serde(default)]
    pub symmetry: Option<SymmetrySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub version: u32,
    pub models: Vec<ModelRecord>,
}

impl ModelsFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: ModelsFile = read_json(path)?;
        check_version(path, file.version)?;
        Ok(file)
    }

    pub fn model(&self, obj_id: u32) -> CliResult<&ModelRecord> {
        self.models.iter().find(|m| m.obj_id == obj_id).ok_or_else(|| CliError::Data(format!("no model with obj_id {obj_id}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFile {
    pub version: u32,
    pub seed_index: usize,
    pub keypoints: KeypointSet,
}

impl KeypointFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: KeypointFile = read_json(path)?;
        check_version(path, file.version)?;
        file.keypoints.validate()?;
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub image_id: u64,
    /// Pose after symmetry canonicalization.
    pub pose: PoseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<VisibilityLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub version: u32,
    pub obj_id: u32,
    pub images: Vec<LabelRecord>,
}

impl LabelsFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: LabelsFile = read_json(path)?;
        check_version(path, file.version)?;
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecord {
    pub image_id: u64,
    /// Absent when no keypoint is visible; `fallback` is then set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceVector>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFile {
    pub version: u32,
    pub k: usize,
    pub c: f64,
    pub images: Vec<ImportanceRecord>,
}

impl ImportanceFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: ImportanceFile = read_json(path)?;
        check_version(path, file.version)?;
        Ok(file)
    }
}

/// Reads a symmetry file: either our own format or a BOP `models_info`
/// entry (`symmetries_discrete` as 4×4 row-major matrices in millimeters,
/// `symmetries_continuous` as `{axis, offset}`).
pub fn load_symmetry(path: &Path) -> CliResult<SymmetrySpec> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("discrete").is_some() {
        return serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())));
    }
    symmetry_from_bop(&value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn symmetry_from_bop(info: &serde_json::Value) -> CliResult<SymmetrySpec> {
    let bad = |m: &str| CliError::Data(format!("BOP symmetry: {m}"));
    let mut discrete = vec![Mat3::identity()];
    if let Some(list) = info.get("symmetries_discrete") {
        let list: Vec<Vec<f64>> = serde_json::from_value(list.clone()).map_err(|_| bad("discrete entries must be 16-float arrays"))?;
        for m in list {
            if m.len() != 16 {
                return Err(bad("discrete entries must have 16 values"));
            }
            let r = Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
            if (r - Mat3::identity()).abs().max() > 1e-9 {
                discrete.push(r);
            }
        }
    }
    let mut axes = Vec::new();
    if let Some(list) = info.get("symmetries_continuous") {
        let list = list.as_array().ok_or_else(|| bad("continuous symmetries must be a list"))?;
        for entry in list {
            let axis: [f64; 3] = serde_json::from_value(entry.get("axis").cloned().unwrap_or_default())
                .map_err(|_| bad("continuous symmetry needs a 3-float axis"))?;
            axes.push(Vec3::from(axis).normalize());
        }
    }
    Ok(SymmetrySpec::new(discrete, axes)?)
}
