//! Subcommands other than `simulate` and `evaluate`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use viskp_core::geometry::io::load_mesh;
use viskp_core::geometry::{farthest_point_sampling, icosphere_rotation_sample, object_diameter};
use viskp_core::importance::{build_knn_graph, importance, precompute_ppr, RestartVector};
use viskp_core::render::image_io::read_pgm;
use viskp_core::render::{Scene, SceneEntry};
use viskp_core::symmetry::{build_sym_subset, sym_subset_translation, Canonicalizer, SymmetrySpec};
use viskp_core::visibility::{label_keypoints, labeling_accuracy, oracle_visibility};
use viskp_core::KeypointSet;

use crate::dataset::{
    base_dir, load_symmetry, write_json, AnnotationsFile, ImportanceFile, ImportanceRecord, KeypointFile, LabelRecord, LabelsFile, ModelsFile,
    PoseRecord, ANNOTATIONS_FILE, FORMAT_VERSION, MODELS_FILE,
};
use crate::{CliError, CliResult};

/// FPS keypoints from vertex 0.
pub fn cmd_sample_keypoints(mesh: &Path, scale: f64, n: usize, out: &Path) -> CliResult<KeypointFile> {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mesh = load_mesh(mesh, scale)?;
    if n > mesh.vertex_count() {
        return Err(CliError::Usage(format!("--n {n} exceeds the {} mesh vertices", mesh.vertex_count())));
    }
    let file = KeypointFile { version: FORMAT_VERSION, seed_index: 0, keypoints: farthest_point_sampling(&mesh, n, 0)? };
    write_json(out, &file)?;
    Ok(file)
}

/// Per-image labels of one object. Poses are canonicalized first when a
/// symmetry spec is given. Frames with unreadable masks get an error entry.
pub fn cmd_label(
    mesh: &Path,
    keypoints: &Path,
    annotations: &Path,
    symmetry: Option<&Path>,
    obj_id: Option<u32>,
    out: &Path,
) -> CliResult<LabelsFile> {
    let mesh = load_mesh(mesh, 1.0)?;
    let kps = KeypointFile::load(keypoints)?.keypoints;
    let ann = AnnotationsFile::load(annotations)?;
    let base = base_dir(annotations);
    let obj_id = obj_id.unwrap_or(ann.target_obj_id);
    let spec = symmetry.map(load_symmetry).transpose()?.unwrap_or_else(SymmetrySpec::asymmetric);
    let canon = Canonicalizer::new(&spec, &kps, object_diameter(&mesh))?;

    let images = ann
        .images
        .par_iter()
        .filter_map(|img| {
            let obj = img.object(obj_id)?;
            let record = (|| -> CliResult<LabelRecord> {
                let pose = canon.canonicalize(&obj.pose.to_pose()?)?;
                let camera = img.camera.to_camera()?;
                let labels = read_pgm(&base.join(&obj.mask)).and_then(|mask| label_keypoints(&kps, &pose, &camera, &mask));
                Ok(match labels {
                    Ok(l) => LabelRecord { image_id: img.image_id, pose: PoseRecord::from_pose(&pose), labels: Some(l), error: None },
                    Err(e) => LabelRecord { image_id: img.image_id, pose: PoseRecord::from_pose(&pose), labels: None, error: Some(e.to_string()) },
                })
            })();
            Some(record)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let file = LabelsFile { version: FORMAT_VERSION, obj_id, images };
    write_json(out, &file)?;
    Ok(file)
}

/// Importance per labeled image; the graph and `T_ppr` are built once.
pub fn cmd_importance(labels: &Path, keypoints: &Path, k: usize, c: f64, out: &Path) -> CliResult<ImportanceFile> {
    let kps = KeypointFile::load(keypoints)?.keypoints;
    let labels = LabelsFile::load(labels)?;
    if k == 0 || k >= kps.len() {
        return Err(CliError::Usage(format!("--k must be in 1..{}", kps.len())));
    }
    let ppr = precompute_ppr(build_knn_graph(&kps.points, k)?, c)?;
    let mut images = Vec::new();
    for rec in &labels.images {
        let Some(l) = &rec.labels else { continue };
        if l.len() != kps.len() {
            return Err(CliError::Data(format!("image {}: {} labels for {} keypoints", rec.image_id, l.len(), kps.len())));
        }
        let entry = match RestartVector::from_visibility(&l.v) {
            Ok(s) => ImportanceRecord { image_id: rec.image_id, importance: Some(importance(&ppr, &s)?), fallback: false },
            Err(_) => ImportanceRecord { image_id: rec.image_id, importance: None, fallback: true },
        };
        images.push(entry);
    }
    let file = ImportanceFile { version: FORMAT_VERSION, k, c, images };
    write_json(out, &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymSubsetFile {
    pub version: u32,
    pub level: u32,
    pub translation: [f64; 3],
    pub indices: Vec<usize>,
}

pub fn cmd_sym_subset(mesh: &Path, keypoints: &Path, level: u32, out: &Path) -> CliResult<SymSubsetFile> {
    let mesh = load_mesh(mesh, 1.0)?;
    let kps = KeypointFile::load(keypoints)?.keypoints;
    let t = sym_subset_translation(object_diameter(&mesh));
    let subset = build_sym_subset(&kps, &icosphere_rotation_sample(level), &t)?;
    let file = SymSubsetFile { version: FORMAT_VERSION, level, translation: [t.x, t.y, t.z], indices: subset.indices };
    write_json(out, &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAccuracy {
    pub image_id: u64,
    /// Agreement of the mask + back-face labels with ray casting.
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub version: u32,
    pub obj_id: u32,
    pub mean_accuracy: Option<f64>,
    pub images: Vec<ImageAccuracy>,
}

/// Label accuracy against the ray-cast oracle over a dataset directory.
pub fn cmd_accuracy(dataset: &Path, keypoints: Option<&KeypointSet>, n: usize, out: Option<&Path>) -> CliResult<AccuracyReport> {
    let models = ModelsFile::load(&dataset.join(MODELS_FILE))?;
    let ann = AnnotationsFile::load(&dataset.join(ANNOTATIONS_FILE))?;
    let obj_id = ann.target_obj_id;
    let mut meshes = BTreeMap::new();
    for m in &models.models {
        meshes.insert(m.obj_id, Arc::new(load_mesh(&dataset.join(&m.mesh), 1.0)?));
    }
    let kps = match keypoints {
        Some(k) => k.clone(),
        None => farthest_point_sampling(&meshes[&models.model(obj_id)?.obj_id], n, 0)?,
    };
    let images: Vec<ImageAccuracy> = ann
        .images
        .par_iter()
        .map(|img| {
            let run = || -> CliResult<f64> {
                let camera = img.camera.to_camera()?;
                let mut entries = Vec::new();
                let mut target = None;
                for o in &img.objects {
                    let mesh = meshes.get(&o.obj_id).ok_or_else(|| CliError::Data(format!("no model for object {}", o.obj_id)))?;
                    if o.obj_id == obj_id {
                        target = Some((entries.len(), o));
                    }
                    entries.push(SceneEntry { mesh: mesh.clone(), pose: o.pose.to_pose()? });
                }
                let (ti, obj) = target.ok_or_else(|| CliError::Data("target missing".into()))?;
                let pose = entries[ti].pose;
                let scene = Scene::new(entries, ti)?;
                let mask = read_pgm(&dataset.join(&obj.mask))?;
                let labels = label_keypoints(&kps, &pose, &camera, &mask)?;
                Ok(labeling_accuracy(&labels.v, &oracle_visibility(&kps, &scene))?)
            };
            match run() {
                Ok(a) => ImageAccuracy { image_id: img.image_id, accuracy: Some(a), error: None },
                Err(e) => ImageAccuracy { image_id: img.image_id, accuracy: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let ok: Vec<f64> = images.iter().filter_map(|i| i.accuracy).collect();
    let mean_accuracy = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
    let report = AccuracyReport { version: FORMAT_VERSION, obj_id, mean_accuracy, images };
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}
