use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viskp_core::geometry::{farthest_point_sampling, object_diameter, shapes};
use viskp_core::importance::{build_knn_graph, importance, precompute_ppr, RestartVector};
use viskp_core::localizer::{simulate_localization, NoiseModel};
use viskp_core::metrics::add_metric;
use viskp_core::pnp::{ransac_pnp, reprojection_errors, CorrespondenceSet, RansacConfig};
use viskp_core::pose::random_rotation;
use viskp_core::render::{generate_scene, render_visible_mask, SceneConfig};
use viskp_core::selection::{select_with_fallback, SelectionConfig};
use viskp_core::visibility::{label_keypoints, oracle_visibility};
use viskp_core::{Camera, Pixel, Pose, Vec3};

fn camera() -> Camera {
    Camera::new(572.4, 573.6, 325.3, 242.0, 640, 480).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reported_inliers_are_within_threshold(seed in any::<u64>(), outliers in 0.0f64..0.6, thresh in 0.5f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = camera();
        let gt = Pose::new(random_rotation(&mut rng), Vec3::new(0.0, 0.0, 0.8)).unwrap();
        let pts: Vec<Vec3> = (0..60).map(|_| Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))).collect();
        let px: Vec<Pixel> = pts
            .iter()
            .map(|p| {
                let q = cam.project_camera(&gt.transform_point(p)).unwrap();
                let jitter = Pixel::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if rng.random::<f64>() < outliers { q + jitter * 40.0 } else { q + jitter }
            })
            .collect();
        let cs = CorrespondenceSet::new(pts, px).unwrap();
        if let Ok(est) = ransac_pnp(&cs, &cam, &RansacConfig { iterations: 100, threshold: thresh, seed }) {
            let errs = reprojection_errors(&est.pose, &cam, &cs);
            for (e, inlier) in errs.iter().zip(&est.inliers) {
                prop_assert_eq!(*inlier, *e <= thresh);
            }
        }
    }
}

#[test]
fn occluded_scene_pose_is_recovered_from_selected_keypoints() {
    let cam = camera();
    let mesh = Arc::new(shapes::torus(0.08, 0.03, 64, 32));
    let kps = farthest_point_sampling(&mesh, 256, 0).unwrap();
    let diameter = object_diameter(&mesh);
    let ppr = precompute_ppr(build_knn_graph(&kps.points, 20).unwrap(), 0.85).unwrap();
    let occluders = vec![Arc::new(shapes::cube(0.1))];
    let cfg = SelectionConfig::half_of(kps.len());
    let mut good = 0;
    for seed in 0..10 {
        let scene = generate_scene(mesh.clone(), &occluders, &cam, &SceneConfig::default(), seed).unwrap();
        let gt = scene.target().pose;
        let mask = render_visible_mask(&scene, &cam).unwrap();
        let labels = label_keypoints(&kps, &gt, &cam, &mask).unwrap();
        let r = RestartVector::from_visibility(&labels.v).ok().map(|s| importance(&ppr, &s).unwrap());
        let sel = select_with_fallback(&labels.v, r.as_ref(), &kps, &cfg).unwrap();
        let oracle = oracle_visibility(&kps, &scene);
        let px = simulate_localization(&kps, &gt, &cam, &oracle, &NoiseModel::default(), seed).unwrap();
        let chosen = kps.subset(&sel.indices);
        let chosen_px: Vec<Pixel> = sel.indices.iter().map(|&i| px[i]).collect();
        let cs = CorrespondenceSet::new(chosen.points, chosen_px).unwrap();
        let est = ransac_pnp(&cs, &cam, &RansacConfig { seed, ..RansacConfig::default() }).unwrap();
        if add_metric(mesh.vertices(), &gt, &est.pose) < 0.1 * diameter {
            good += 1;
        }
    }
    assert!(good >= 9, "{good}/10");
}
