//! Synthetic occluded datasets.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use viskp_core::geometry::io::{load_mesh, write_obj};
use viskp_core::geometry::{object_diameter, shapes};
use viskp_core::render::image_io::{write_depth, write_pgm};
use viskp_core::render::{generate_scene, rasterize_depth, render_visible_mask, DepthImage, Scene, SceneConfig};
use viskp_core::symmetry::SymmetrySpec;
use viskp_core::{Camera, Mat3, Mesh, Vec3};

use crate::dataset::{
    write_json, AnnotationRecord, AnnotationsFile, CameraRecord, ModelRecord, ModelsFile, ObjectAnnotation, PoseRecord, ANNOTATIONS_FILE,
    FORMAT_VERSION, MODELS_FILE,
};
use crate::{derive_seed, CliError, CliResult};

pub const TARGET_OBJ_ID: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetShape {
    Torus,
    Sphere,
    Cylinder,
    File(PathBuf),
}

impl FromStr for TargetShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "torus" => TargetShape::Torus,
            "sphere" => TargetShape::Sphere,
            "cylinder" => TargetShape::Cylinder,
            path if path.ends_with(".obj") || path.ends_with(".ply") => TargetShape::File(path.into()),
            other => return Err(format!("unknown target {other:?}: use torus, sphere, cylinder or an .obj/.ply path")),
        })
    }
}

impl TargetShape {
    /// Mesh plus its symmetries. Built-in shapes are sized like household
    /// objects and have enough vertices for 512 keypoints.
    pub fn build(&self) -> CliResult<(Mesh, SymmetrySpec)> {
        let flip = viskp_core::pose::rot_x(std::f64::consts::PI);
        Ok(match self {
            TargetShape::Torus => (shapes::torus(0.08, 0.03, 64, 32), SymmetrySpec::new(vec![Mat3::identity(), flip], vec![Vec3::z()])?),
            TargetShape::Sphere => (shapes::icosphere(0.05, 4), SymmetrySpec::new(vec![Mat3::identity()], vec![Vec3::z(), Vec3::y()])?),
            TargetShape::Cylinder => (shapes::cylinder(0.04, 0.15, 64, 16), SymmetrySpec::new(vec![Mat3::identity(), flip], vec![Vec3::z()])?),
            TargetShape::File(p) => (load_mesh(p, 1.0)?, SymmetrySpec::asymmetric()),
        })
    }
}

fn occluder_meshes() -> Vec<Mesh> {
    vec![shapes::cube(0.1), shapes::cuboid(Vec3::new(0.2, 0.06, 0.06)), shapes::cylinder(0.03, 0.12, 24, 1)]
}

pub const MAX_OCCLUDERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub scenes: usize,
    pub seed: u64,
    pub target: TargetShape,
    pub occluders: usize,
    pub coverage: (f64, f64),
    pub distance: (f64, f64),
    pub camera: Camera,
    /// Record the target's symmetries in `models.json`.
    pub with_symmetry: bool,
    pub write_depth: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scenes: 100,
            seed: 0,
            target: TargetShape::Torus,
            occluders: 2,
            coverage: (0.3, 0.6),
            distance: (0.6, 1.0),
            camera: Camera { fx: 572.4, fy: 573.6, cx: 325.3, cy: 242.0, width: 640, height: 480 },
            with_symmetry: false,
            write_depth: true,
        }
    }
}

fn mask_name(image: u64, obj: u32) -> String {
    format!("masks/{image:06}_{obj:06}.pgm")
}

fn scene_depth(scene: &Scene, camera: &Camera) -> CliResult<DepthImage> {
    let mut out = DepthImage::empty(camera.width, camera.height);
    for e in &scene.entries {
        let d = rasterize_depth(&e.mesh, &e.pose, camera)?;
        for (o, v) in out.depths.iter_mut().zip(&d.depths) {
            if *v > 0.0 && (*o == 0.0 || *v < *o) {
                *o = *v;
            }
        }
    }
    Ok(out)
}

/// Writes `models/`, `masks/`, `depth/`, `models.json` and
/// `annotations.json` under `out`. Object 1 is the target; occluders follow.
pub fn cmd_simulate(config: &SimulateConfig, out: &Path) -> CliResult<AnnotationsFile> {
    if config.occluders > MAX_OCCLUDERS {
        return Err(CliError::Usage(format!("at most {MAX_OCCLUDERS} occluders")));
    }
    if config.scenes == 0 {
        return Err(CliError::Usage("--scenes must be positive".into()));
    }
    config.camera.validate()?;
    let (target, symmetry) = config.target.build()?;
    let target = Arc::new(target);
    let occluders: Vec<Arc<Mesh>> = occluder_meshes().into_iter().take(config.occluders).map(Arc::new).collect();

    std::fs::create_dir_all(out.join("models"))?;
    std::fs::create_dir_all(out.join("masks"))?;
    if config.write_depth {
        std::fs::create_dir_all(out.join("depth"))?;
    }
    let mut models = Vec::new();
    for (i, mesh) in std::iter::once(&target).chain(&occluders).enumerate() {
        let obj_id = TARGET_OBJ_ID + i as u32;
        let rel = format!("models/obj_{obj_id:06}.obj");
        write_obj(mesh, &out.join(&rel))?;
        let symmetry = (i == 0 && config.with_symmetry && !symmetry.is_asymmetric()).then(|| symmetry.clone());
        models.push(ModelRecord { obj_id, mesh: rel, diameter: object_diameter(mesh), symmetry });
    }
    write_json(&out.join(MODELS_FILE), &ModelsFile { version: FORMAT_VERSION, models })?;

    let (c0, c1) = if config.occluders == 0 { (0.0, 0.0) } else { config.coverage };
    let scene_cfg = SceneConfig { distance_range: config.distance, coverage_range: (c0, c1), ..SceneConfig::default() };
    let camera = config.camera;
    let images = (0..config.scenes as u64)
        .into_par_iter()
        .map(|image_id| -> CliResult<AnnotationRecord> {
            let scene = generate_scene(target.clone(), &occluders, &camera, &scene_cfg, derive_seed(config.seed, image_id))?;
            let mut objects = Vec::with_capacity(scene.entries.len());
            for (j, e) in scene.entries.iter().enumerate() {
                let obj_id = TARGET_OBJ_ID + j as u32;
                let view = Scene { entries: scene.entries.clone(), target_index: j };
                let mask = render_visible_mask(&view, &camera)?;
                let rel = mask_name(image_id, obj_id);
                write_pgm(&mask, &out.join(&rel))?;
                objects.push(ObjectAnnotation { obj_id, pose: PoseRecord::from_pose(&e.pose), mask: rel });
            }
            let depth = if config.write_depth {
                let rel = format!("depth/{image_id:06}.vdph");
                write_depth(&scene_depth(&scene, &camera)?, &out.join(&rel))?;
                Some(rel)
            } else {
                None
            };
            Ok(AnnotationRecord { image_id, camera: CameraRecord::from_camera(&camera), objects, depth })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let file = AnnotationsFile { version: FORMAT_VERSION, target_obj_id: TARGET_OBJ_ID, images };
    write_json(&out.join(ANNOTATIONS_FILE), &file)?;
    Ok(file)
}
