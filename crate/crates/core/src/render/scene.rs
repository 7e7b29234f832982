use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::MIN_DEPTH;
use crate::geometry::{icosphere_directions, rotation_looking_along};
use crate::pose::rot_z;
use crate::{Camera, Error, Mesh, Pose, Result, Vec3};

use super::{render_silhouette, render_visible_mask};

#[derive(Debug, Clone)]
pub struct SceneEntry {
    pub mesh: Arc<Mesh>,
    pub pose: Pose,
}

/// Posed meshes in front of the camera; one of them is the object of interest.
#[derive(Debug, Clone)]
pub struct Scene {
    pub entries: Vec<SceneEntry>,
    pub target_index: usize,
}

impl Scene {
    pub fn new(entries: Vec<SceneEntry>, target_index: usize) -> Result<Self> {
        if target_index >= entries.len() {
            return Err(Error::invalid("scene target index out of range"));
        }
        for (i, e) in entries.iter().enumerate() {
            if let Some(z) = e.mesh.vertices().iter().map(|v| e.pose.transform_point(v).z).find(|z| *z <= MIN_DEPTH) {
                return Err(Error::invalid(format!("scene entry {i} is not in front of the camera (z = {z})")));
            }
        }
        Ok(Scene { entries, target_index })
    }

    pub fn target(&self) -> &SceneEntry {
        &self.entries[self.target_index]
    }
}

/// Sampling ranges for synthetic occluded scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Icosphere level of the target viewing directions.
    pub view_level: u32,
    /// Target distance along the optical axis, meters.
    pub distance_range: (f64, f64),
    /// Uniform random roll about the viewing direction.
    pub random_roll: bool,
    /// Accepted fraction of the silhouette hidden by occluders.
    pub coverage_range: (f64, f64),
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig { view_level: 2, distance_range: (0.6, 1.0), random_roll: true, coverage_range: (0.3, 0.6), max_attempts: 1000 }
    }
}

impl SceneConfig {
    fn validate(&self) -> Result<()> {
        let (d0, d1) = self.distance_range;
        let (c0, c1) = self.coverage_range;
        if !(d0 > 0.0 && d1 >= d0) {
            return Err(Error::invalid("distance range must be positive and ordered"));
        }
        if !(0.0..=1.0).contains(&c0) || !(0.0..=1.0).contains(&c1) || c0 > c1 {
            return Err(Error::invalid("coverage range must lie in [0, 1] and be ordered"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be positive"));
        }
        Ok(())
    }
}

fn occluded_fraction(scene: &Scene, camera: &Camera, silhouette_px: usize) -> Result<f64> {
    let visible = render_visible_mask(scene, camera)?.count();
    Ok(1.0 - visible as f64 / silhouette_px as f64)
}

/// Builds a scene with the target at index 0 followed by the occluders.
///
/// The target looks along a random icosphere direction at a random distance
/// on the optical axis. Each occluder is put on a fronto-parallel slab
/// between camera and target and slid sideways (bisection on the lateral
/// offset) until the cumulative hidden fraction reaches its share of a
/// coverage drawn from `coverage_range`. Attempts whose measured coverage
/// falls outside the range are redrawn.
pub fn generate_scene(target: Arc<Mesh>, occluders: &[Arc<Mesh>], camera: &Camera, config: &SceneConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    camera.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = icosphere_directions(config.view_level);
    let target_radius = target.bounding_radius();

    for _ in 0..config.max_attempts {
        let dir = directions[rng.random_range(0..directions.len())];
        let roll = if config.random_roll { rng.random_range(0.0..std::f64::consts::TAU) } else { 0.0 };
        let (d0, d1) = config.distance_range;
        let distance = if d1 > d0 { rng.random_range(d0..d1) } else { d0 };
        // the object axis `dir` ends up pointing at the camera
        let rotation = rot_z(roll) * crate::pose::rot_x(std::f64::consts::PI) * rotation_looking_along(&dir).transpose();
        let target_pose = Pose { rotation, translation: Vec3::new(0.0, 0.0, distance) };
        let entry = SceneEntry { mesh: target.clone(), pose: target_pose };
        let mut scene = match Scene::new(vec![entry], 0) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if occluders.is_empty() {
            return Ok(scene);
        }
        let silhouette = render_silhouette(&target, &target_pose, camera)?.count();
        if silhouette == 0 {
            continue;
        }

        let (c0, c1) = config.coverage_range;
        let goal = if c1 > c0 { rng.random_range(c0..c1) } else { c0 };
        let mut placed = true;
        for (i, occ) in occluders.iter().enumerate() {
            let share = goal * (i + 1) as f64 / occluders.len() as f64;
            let occ_radius = occ.bounding_radius();
            let near = distance - target_radius - occ_radius;
            let lo = occ_radius + MIN_DEPTH.max(0.01 * distance);
            if near <= lo {
                placed = false;
                break;
            }
            let depth = lo + (near - lo) * rng.random_range(0.2..0.9);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let spin = rot_z(rng.random_range(0.0..std::f64::consts::TAU));
            let lateral = Vec3::new(angle.cos(), angle.sin(), 0.0);
            let pose_at = |offset: f64| Pose { rotation: spin, translation: lateral * offset + Vec3::new(0.0, 0.0, depth) };

            // offsets at the occluder's own depth; beyond `far` there is no overlap
            let far = target_radius * depth / (distance - target_radius) + occ_radius;
            scene.entries.push(SceneEntry { mesh: occ.clone(), pose: pose_at(0.0) });
            let last = scene.entries.len() - 1;
            let coverage_at = |offset: f64, scene: &mut Scene| -> Result<f64> {
                scene.entries[last].pose = pose_at(offset);
                occluded_fraction(scene, camera, silhouette)
            };
            let (mut inner, mut outer) = (0.0, far);
            if coverage_at(inner, &mut scene)? < share {
                continue;
            }
            for _ in 0..20 {
                let mid = 0.5 * (inner + outer);
                if coverage_at(mid, &mut scene)? >= share {
                    inner = mid;
                } else {
                    outer = mid;
                }
            }
            coverage_at(inner, &mut scene)?;
        }
        if !placed {
            continue;
        }
        let coverage = occluded_fraction(&scene, camera, silhouette)?;
        if coverage >= c0 && coverage <= c1 {
            return Ok(scene);
        }
    }
    Err(Error::Unsatisfiable(format!(
        "no scene reached coverage in [{}, {}] after {} attempts",
        config.coverage_range.0, config.coverage_range.1, config.max_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn setup() -> (Arc<Mesh>, Vec<Arc<Mesh>>, Camera) {
        let cam = Camera::new(500.0, 500.0, 63.5, 63.5, 128, 128).unwrap();
        (Arc::new(shapes::icosphere(0.05, 3)), vec![Arc::new(shapes::plate(0.12, 0.12, 1))], cam)
    }

    #[test]
    fn same_seed_same_scene() {
        let (t, o, cam) = setup();
        let cfg = SceneConfig::default();
        let a = generate_scene(t.clone(), &o, &cam, &cfg, 9).unwrap();
        let b = generate_scene(t, &o, &cam, &cfg, 9).unwrap();
        let poses = |s: &Scene| s.entries.iter().map(|e| e.pose).collect::<Vec<_>>();
        assert_eq!(poses(&a), poses(&b));
    }

    #[test]
    fn no_occluders_gives_full_silhouette() {
        let (t, _, cam) = setup();
        let s = generate_scene(t.clone(), &[], &cam, &SceneConfig::default(), 1).unwrap();
        let mask = render_visible_mask(&s, &cam).unwrap();
        assert_eq!(mask, render_silhouette(&t, &s.entries[0].pose, &cam).unwrap());
    }

    #[test]
    fn coverage_lands_in_range() {
        let (t, o, cam) = setup();
        let cfg = SceneConfig { coverage_range: (0.4, 0.6), ..SceneConfig::default() };
        let mut hits = 0;
        for seed in 0..100 {
            let s = generate_scene(t.clone(), &o, &cam, &cfg, seed).unwrap();
            let sil = render_silhouette(&t, &s.entries[0].pose, &cam).unwrap();
            let vis = render_visible_mask(&s, &cam).unwrap();
            assert!(vis.is_subset_of(&sil));
            let reduction = 1.0 - vis.count() as f64 / sil.count() as f64;
            if (0.3..=0.7).contains(&reduction) {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn impossible_coverage_is_reported() {
        let (t, _, cam) = setup();
        let tiny = vec![Arc::new(shapes::plate(0.001, 0.001, 1))];
        let cfg = SceneConfig { coverage_range: (0.9, 1.0), max_attempts: 5, ..SceneConfig::default() };
        assert!(matches!(generate_scene(t, &tiny, &cam, &cfg, 0), Err(Error::Unsatisfiable(_))));
    }
}
