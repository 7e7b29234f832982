use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viskp_core::geometry::{farthest_point_sampling, farthest_point_sampling_points, ray_triangle, shapes, RAY_EPSILON};
use viskp_core::pose::random_rotation;
use viskp_core::render::{generate_scene, render_silhouette, render_visible_mask, MaskImage, Scene, SceneConfig, SceneEntry};
use viskp_core::{Camera, Mesh, Pose, Vec3};

fn min_pairwise(points: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

#[test]
fn fps_is_deterministic() {
    let mesh = shapes::torus(0.08, 0.03, 32, 16);
    let a = farthest_point_sampling(&mesh, 64, 0).unwrap();
    let b = farthest_point_sampling(&mesh, 64, 0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fps_spreads_better_than_random_subsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud: Vec<Vec3> =
        (0..200).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = 20;
    let fps: Vec<Vec3> = farthest_point_sampling_points(&cloud, n, 0).unwrap().iter().map(|&i| cloud[i]).collect();
    let spread = min_pairwise(&fps);
    for _ in 0..100 {
        let pick: Vec<Vec3> = sample(&mut rng, cloud.len(), n).iter().map(|i| cloud[i]).collect();
        assert!(spread >= min_pairwise(&pick));
    }
}

fn face_normal(t: &[Vec3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(&(t[2] - t[0]))
}

#[test]
fn convex_mesh_has_at_most_one_entry_hit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for mesh in [shapes::icosphere(0.05, 2), shapes::cube(0.1)] {
        for _ in 0..300 {
            let dir = random_rotation(&mut rng) * Vec3::z();
            let origin = dir * 0.3;
            let aim = Vec3::new(rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04));
            let ray = (aim - origin).normalize();
            let entries = (0..mesh.faces().len())
                .filter(|&f| {
                    let tri = mesh.triangle(f);
                    ray_triangle(&origin, &ray, &tri, RAY_EPSILON, f64::INFINITY).is_some() && face_normal(&tri).dot(&ray) < 0.0
                })
                .count();
            assert!(entries <= 1, "{entries} entry hits");
        }
    }
}

fn small_camera() -> Camera {
    Camera::centered(300.0, 128).unwrap()
}

fn random_scene(seed: u64) -> Scene {
    let occluders = vec![Arc::new(shapes::cube(0.05)), Arc::new(shapes::plate(0.08, 0.03, 1))];
    generate_scene(Arc::new(shapes::torus(0.08, 0.03, 32, 16)), &occluders, &small_camera(), &SceneConfig::default(), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn visible_mask_is_inside_silhouette(seed in any::<u64>()) {
        let scene = random_scene(seed);
        let cam = small_camera();
        let target = scene.target();
        let mask = render_visible_mask(&scene, &cam).unwrap();
        prop_assert!(mask.is_subset_of(&render_silhouette(&target.mesh, &target.pose, &cam).unwrap()));
    }

    #[test]
    fn adding_an_occluder_never_reveals_pixels(seed in any::<u64>(), x in -0.05f64..0.05, y in -0.05f64..0.05) {
        let mut scene = random_scene(seed);
        let cam = small_camera();
        let before = render_visible_mask(&scene, &cam).unwrap();
        let z = scene.target().pose.translation.z * 0.5;
        let extra = Pose { rotation: random_rotation(&mut ChaCha8Rng::seed_from_u64(seed)), translation: Vec3::new(x, y, z) };
        scene.entries.push(SceneEntry { mesh: Arc::new(shapes::cube(0.04)), pose: extra });
        let after = render_visible_mask(&scene, &cam).unwrap();
        prop_assert!(after.is_subset_of(&before));
    }
}

fn components_8(mask: &MaskImage) -> usize {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; (w * h) as usize];
    let mut count = 0;
    for y0 in 0..h {
        for x0 in 0..w {
            if !mask.get(x0, y0) || seen[(y0 * w + x0) as usize] {
                continue;
            }
            count += 1;
            let mut stack = vec![(x0, y0)];
            seen[(y0 * w + x0) as usize] = true;
            while let Some((x, y)) = stack.pop() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        if mask.get(nx, ny) && !seen[(ny * w + nx) as usize] {
                            seen[(ny * w + nx) as usize] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }
    count
}

#[test]
fn convex_silhouettes_are_connected() {
    let cam = small_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let meshes: Vec<Mesh> = vec![shapes::icosphere(0.05, 3), shapes::cube(0.08), shapes::cuboid(Vec3::new(0.12, 0.03, 0.05))];
    for mesh in &meshes {
        for _ in 0..20 {
            let pose = Pose::new(random_rotation(&mut rng), Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), 0.5)).unwrap();
            let sil = render_silhouette(mesh, &pose, &cam).unwrap();
            assert!(sil.count() > 0);
            assert_eq!(components_8(&sil), 1);
        }
    }
}
