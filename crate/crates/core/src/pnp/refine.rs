use nalgebra::{Matrix6, Vector6};

use super::CorrespondenceSet;
use crate::pose::axis_angle;
use crate::{Camera, Pose, Vec3};

const MAX_ITERS: usize = 30;

fn cost(pose: &Pose, camera: &Camera, cs: &CorrespondenceSet) -> f64 {
    cs.points3d
        .iter()
        .zip(&cs.pixels2d)
        .map(|(p, px)| match camera.project_camera(&pose.transform_point(p)) {
            Ok(q) => (q - px).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

fn perturb(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let w = Vec3::new(delta[0], delta[1], delta[2]);
    let angle = w.norm();
    let rot = if angle > 0.0 { axis_angle(&(w / angle), angle) } else { crate::Mat3::identity() };
    Pose { rotation: crate::pose::orthonormalize(&(rot * pose.rotation)), translation: pose.translation + Vec3::new(delta[3], delta[4], delta[5]) }
}

/// Levenberg-Marquardt on the summed squared pixel error, starting from
/// `pose`. Never returns a pose with higher error than the start.
pub fn refine_pose(pose: &Pose, camera: &Camera, cs: &CorrespondenceSet) -> Pose {
    let mut current = *pose;
    let mut current_cost = cost(&current, camera, cs);
    if !current_cost.is_finite() || cs.len() < 3 {
        return current;
    }
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERS {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (p, px) in cs.points3d.iter().zip(&cs.pixels2d) {
            let rp = current.rotation * p;
            let pc = rp + current.translation;
            let (x, y, z) = (pc.x, pc.y, pc.z);
            let r = [camera.fx * x / z + camera.cx - px.x, camera.fy * y / z + camera.cy - px.y];
            let du = Vec3::new(camera.fx / z, 0.0, -camera.fx * x / (z * z));
            let dv = Vec3::new(0.0, camera.fy / z, -camera.fy * y / (z * z));
            for (d, res) in [(du, r[0]), (dv, r[1])] {
                // d(pc)/d(omega) = -[R p]_x, d(pc)/dt = I
                let jw = rp.cross(&d);
                let row = Vector6::new(jw.x, jw.y, jw.z, d.x, d.y, d.z);
                jtj += row * row.transpose();
                jtr += row * res;
            }
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj;
            for i in 0..6 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = perturb(&current, &step);
            let c = cost(&candidate, camera, cs);
            if c < current_cost {
                let gain = current_cost - c;
                current = candidate;
                current_cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = gain > 1e-12 * current_cost.max(1e-30);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    current
}
