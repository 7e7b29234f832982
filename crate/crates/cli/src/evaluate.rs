//! End-to-end evaluation: labels, importance, selection, simulated
//! localization, RANSAC PnP and pose metrics per image.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use viskp_core::geometry::farthest_point_sampling;
use viskp_core::geometry::io::load_mesh;
use viskp_core::importance::{build_knn_graph, importance, precompute_ppr, PprGraph, RestartVector};
use viskp_core::localizer::simulate_localization;
use viskp_core::metrics::{MetricReport, SceneMetrics};
use viskp_core::pnp::{ransac_pnp, CorrespondenceSet};
use viskp_core::render::image_io::read_pgm;
use viskp_core::render::{Scene, SceneEntry};
use viskp_core::selection::select_with_fallback;
use viskp_core::symmetry::Canonicalizer;
use viskp_core::visibility::{label_keypoints, oracle_visibility};
use viskp_core::{KeypointSet, Mesh, Pose};

use crate::dataset::{
    base_dir, write_json, AnnotationRecord, AnnotationsFile, KeypointFile, ModelsFile, ANNOTATIONS_FILE, FORMAT_VERSION, MODELS_FILE,
};
use crate::{derive_seed, CliError, CliResult, RunConfig};

pub const VARIANT_SELECTION: &str = "selection";
pub const VARIANT_ALL: &str = "all";
pub const VARIANT_RANDOM: &str = "random";

const STREAM_NOISE: u64 = 0x6e6f_6973_6500_0000;
const STREAM_RANSAC: u64 = 0x7261_6e73_6163_0000;
const STREAM_RANDOM: u64 = 0x7261_6e64_6f6d_0000;

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub keypoints: Option<PathBuf>,
    /// Also run the all-keypoint and random-subset baselines.
    pub baselines: bool,
    pub obj_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantImageResult {
    pub variant: String,
    /// Distances in meters; absent when no pose was found.
    pub add: Option<f64>,
    pub add_s: Option<f64>,
    pub add_mixed: Option<f64>,
    pub recall_002d: bool,
    pub recall_005d: bool,
    pub recall_01d: bool,
    pub inliers: usize,
    pub correspondences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image_id: u64,
    pub visible_labels: usize,
    pub used_fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub results: Vec<VariantImageResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub obj_id: u32,
    pub diameter: f64,
    pub symmetric: bool,
    pub config: RunConfig,
    pub variants: Vec<VariantSummary>,
    pub images: Vec<ImageReport>,
}

impl EvaluationReport {
    pub fn variant(&self, name: &str) -> Option<&MetricReport> {
        self.variants.iter().find(|v| v.variant == name).map(|v| &v.metrics)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Context<'a> {
    config: &'a RunConfig,
    options: &'a EvaluateOptions,
    base: PathBuf,
    obj_id: u32,
    mesh: Arc<Mesh>,
    diameter: f64,
    symmetric: bool,
    meshes: BTreeMap<u32, Arc<Mesh>>,
    keypoints: KeypointSet,
    ppr: PprGraph,
    canonicalizer: Option<Canonicalizer>,
}

impl Context<'_> {
    fn variants(&self) -> Vec<&'static str> {
        if self.options.baselines {
            vec![VARIANT_SELECTION, VARIANT_ALL, VARIANT_RANDOM]
        } else {
            vec![VARIANT_SELECTION]
        }
    }

    fn failed(&self, record: &AnnotationRecord, error: String) -> (ImageReport, Vec<SceneMetrics>) {
        let metric = SceneMetrics::evaluate(&[], self.diameter, self.symmetric, &Pose::identity(), None);
        let results = self.variants().iter().map(|v| to_result(v, &metric, 0, 0)).collect();
        let n = self.variants().len();
        (ImageReport { image_id: record.image_id, visible_labels: 0, used_fallback: false, error: Some(error), results }, vec![metric; n])
    }

    fn image(&self, record: &AnnotationRecord) -> (ImageReport, Vec<SceneMetrics>) {
        match self.try_image(record) {
            Ok(r) => r,
            Err(e) => self.failed(record, e.to_string()),
        }
    }

    fn try_image(&self, record: &AnnotationRecord) -> CliResult<(ImageReport, Vec<SceneMetrics>)> {
        let cfg = self.config;
        let camera = record.camera.to_camera()?;
        let target = record.object(self.obj_id).ok_or_else(|| CliError::Data(format!("image {} has no object {}", record.image_id, self.obj_id)))?;
        let annotated = target.pose.to_pose()?;
        let gt = match &self.canonicalizer {
            Some(c) => c.canonicalize(&annotated)?,
            None => annotated,
        };
        let mut entries = Vec::with_capacity(record.objects.len());
        let mut target_index = 0;
        for o in &record.objects {
            let mesh = self.meshes.get(&o.obj_id).ok_or_else(|| CliError::Data(format!("no model for object {}", o.obj_id)))?;
            if o.obj_id == self.obj_id {
                target_index = entries.len();
                entries.push(SceneEntry { mesh: mesh.clone(), pose: gt });
            } else {
                entries.push(SceneEntry { mesh: mesh.clone(), pose: o.pose.to_pose()? });
            }
        }
        let scene = Scene::new(entries, target_index)?;

        let mask = read_pgm(&self.base.join(&target.mask))?;
        let labels = label_keypoints(&self.keypoints, &gt, &camera, &mask)?;
        let r = match RestartVector::from_visibility(&labels.v) {
            Ok(s) => Some(importance(&self.ppr, &s)?),
            Err(_) => None,
        };
        let selection = select_with_fallback(&labels.v, r.as_ref(), &self.keypoints, &cfg.selection())?;

        let oracle = oracle_visibility(&self.keypoints, &scene);
        let pixels =
            simulate_localization(&self.keypoints, &gt, &camera, &oracle, &cfg.noise, derive_seed(cfg.seed ^ STREAM_NOISE, record.image_id))?;
        let ransac = cfg.ransac(derive_seed(cfg.seed ^ STREAM_RANSAC, record.image_id));
        let n = self.keypoints.len();

        let mut results = Vec::new();
        let mut metrics = Vec::new();
        for variant in self.variants() {
            let indices: Vec<usize> = match variant {
                VARIANT_SELECTION => selection.indices.clone(),
                VARIANT_ALL => (0..n).collect(),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed ^ STREAM_RANDOM, record.image_id));
                    let mut idx = sample(&mut rng, n, cfg.n_select).into_vec();
                    idx.sort_unstable();
                    idx
                }
            };
            let cs =
                CorrespondenceSet::new(indices.iter().map(|&i| self.keypoints.points[i]).collect(), indices.iter().map(|&i| pixels[i]).collect())?;
            let estimate = ransac_pnp(&cs, &camera, &ransac).ok();
            let m = SceneMetrics::evaluate(self.mesh.vertices(), self.diameter, self.symmetric, &gt, estimate.as_ref().map(|e| &e.pose));
            results.push(to_result(variant, &m, estimate.as_ref().map_or(0, |e| e.inlier_count()), cs.len()));
            metrics.push(m);
        }
        let report = ImageReport {
            image_id: record.image_id,
            visible_labels: labels.visible_count(),
            used_fallback: selection.used_fallback,
            error: None,
            results,
        };
        Ok((report, metrics))
    }
}

fn to_result(variant: &str, m: &SceneMetrics, inliers: usize, correspondences: usize) -> VariantImageResult {
    VariantImageResult {
        variant: variant.to_string(),
        add: finite(m.add),
        add_s: finite(m.add_s),
        add_mixed: finite(m.add_mixed),
        recall_002d: m.recall_002d,
        recall_005d: m.recall_005d,
        recall_01d: m.recall_01d,
        inliers,
        correspondences,
    }
}

/// Runs the evaluation over a dataset directory (as written by `simulate`)
/// and writes `report.json`, `summary.csv` and `summary.txt` to `out`.
pub fn cmd_evaluate(dataset: &Path, out: &Path, config: &RunConfig, options: &EvaluateOptions) -> CliResult<EvaluationReport> {
    config.validate()?;
    let models = ModelsFile::load(&dataset.join(MODELS_FILE))?;
    let annotations = AnnotationsFile::load(&dataset.join(ANNOTATIONS_FILE))?;
    let obj_id = options.obj_id.unwrap_or(annotations.target_obj_id);
    let model = models.model(obj_id)?;
    let mut meshes = BTreeMap::new();
    for m in &models.models {
        meshes.insert(m.obj_id, Arc::new(load_mesh(&dataset.join(&m.mesh), 1.0)?));
    }
    let mesh = meshes[&obj_id].clone();

    let keypoints = match &options.keypoints {
        Some(p) => KeypointFile::load(p)?.keypoints,
        None => farthest_point_sampling(&mesh, config.n, 0)?,
    };
    if keypoints.len() != config.n {
        return Err(CliError::Usage(format!("keypoint file has {} keypoints but --n is {}", keypoints.len(), config.n)));
    }
    config.validate_for(keypoints.len())?;
    let ppr = precompute_ppr(build_knn_graph(&keypoints.points, config.k)?, config.c)?;
    let symmetric = model.symmetry.as_ref().is_some_and(|s| !s.is_asymmetric());
    let canonicalizer = match &model.symmetry {
        Some(spec) if symmetric => Some(Canonicalizer::new(spec, &keypoints, model.diameter)?),
        _ => None,
    };
    let ctx = Context {
        config,
        options,
        base: base_dir(&dataset.join(ANNOTATIONS_FILE)),
        obj_id,
        mesh,
        diameter: model.diameter,
        symmetric,
        meshes,
        keypoints,
        ppr,
        canonicalizer,
    };

    let mut records: Vec<&AnnotationRecord> = annotations.images.iter().collect();
    records.sort_by_key(|r| r.image_id);
    let per_image: Vec<(ImageReport, Vec<SceneMetrics>)> = records.par_iter().map(|r| ctx.image(r)).collect();

    let mut variants = Vec::new();
    for (v, name) in ctx.variants().iter().enumerate() {
        let scenes: Vec<SceneMetrics> = per_image.iter().map(|(_, m)| m[v]).collect();
        variants.push(VariantSummary { variant: name.to_string(), metrics: MetricReport::aggregate(&scenes, config.auc_max)? });
    }
    let report = EvaluationReport {
        version: FORMAT_VERSION,
        obj_id,
        diameter: model.diameter,
        symmetric,
        config: config.clone(),
        variants,
        images: per_image.into_iter().map(|(r, _)| r).collect(),
    };
    write_report(&report, out)?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |x| format!("{x:.6}"))
}

const CSV_HEADER: &str =
    "variant,object,scenes,recall_002d,recall_005d,recall_01d,median_add,median_add_mixed,auc_adds,auc_adds_it,auc_mixed,auc_mixed_it";

fn csv_row(variant: &str, object: &str, m: &MetricReport) -> String {
    format!(
        "{variant},{object},{},{:.4},{:.4},{:.4},{},{},{:.4},{:.4},{:.4},{:.4}",
        m.scenes,
        m.recall_002d,
        m.recall_005d,
        m.recall_01d,
        fmt_opt(m.median_add),
        fmt_opt(m.median_add_mixed),
        m.auc_adds.exact,
        m.auc_adds.interpolated,
        m.auc_add_s_mixed.exact,
        m.auc_add_s_mixed.interpolated
    )
}

/// Summary table: one row per object and variant, then a mean row per
/// variant (identical to the object row while datasets hold one target).
pub fn summary_csv(report: &EvaluationReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for v in &report.variants {
        out += &csv_row(&v.variant, &format!("obj_{:06}", report.obj_id), &v.metrics);
        out.push('\n');
        out += &csv_row(&v.variant, "mean", &v.metrics);
        out.push('\n');
    }
    out
}

pub fn summary_text(report: &EvaluationReport) -> String {
    let rows: Vec<Vec<String>> = summary_csv(report).lines().map(|l| l.split(',').map(str::to_string).collect()).collect();
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn write_report(report: &EvaluationReport, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), report)?;
    std::fs::write(out.join("summary.csv"), summary_csv(report))?;
    std::fs::write(out.join("summary.txt"), summary_text(report))?;
    Ok(())
}
