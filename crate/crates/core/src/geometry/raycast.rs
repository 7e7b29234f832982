//! Watertight ray/triangle intersection (Woop, Benthin, Wald 2013).
//!
//! Shared edges and vertices are never missed by a ray and never counted
//! twice from the same side, which matters for visibility ground truth where
//! rays are shot from mesh vertices.

use crate::{Pose, Vec3};

use super::Mesh;

/// Minimum hit distance along a ray (meters).
pub const RAY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub face: usize,
}

/// Ray parameter at which a ray with unit `dir` hits triangle `(a, b, c)`,
/// if within `(t_min, t_max)`. Both triangle orientations count.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3], t_min: f64, t_max: f64) -> Option<f64> {
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];

    let a = tri[0] - origin;
    let b = tri[1] - origin;
    let c = tri[2] - origin;
    let ax = a[kx] - sx * a[kz];
    let ay = a[ky] - sy * a[kz];
    let bx = b[kx] - sx * b[kz];
    let by = b[ky] - sy * b[kz];
    let cx = c[kx] - sx * c[kz];
    let cy = c[ky] - sy * c[kz];

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t_scaled = u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz];
    let t = t_scaled / det;
    (t > t_min && t < t_max).then_some(t)
}

fn ray_hits_box(origin: &Vec3, dir: &Vec3, lo: &Vec3, hi: &Vec3, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for k in 0..3 {
        let inv = 1.0 / dir[k];
        let (mut near, mut far) = ((lo[k] - origin[k]) * inv, (hi[k] - origin[k]) * inv);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN from 0 * inf means the ray lies in the slab plane: keep going.
        if near.is_nan() || far.is_nan() {
            continue;
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
            return false;
        }
    }
    true
}

fn first_hit_within(mesh: &Mesh, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<RayHit> {
    let (lo, hi) = mesh.bounds();
    let pad = Vec3::repeat(1e-9);
    if !ray_hits_box(origin, dir, &(lo - pad), &(hi + pad), t_max) {
        return None;
    }
    let mut best: Option<RayHit> = None;
    for face in 0..mesh.faces().len() {
        let limit = best.map_or(t_max, |h| h.distance);
        if let Some(t) = ray_triangle(origin, dir, &mesh.triangle(face), RAY_EPSILON, limit) {
            best = Some(RayHit { distance: t, face });
        }
    }
    best
}

/// Nearest intersection beyond `RAY_EPSILON` (object frame), if any.
pub fn ray_mesh_first_hit(mesh: &Mesh, origin: &Vec3, direction: &Vec3) -> Option<RayHit> {
    let len = direction.norm();
    if !(len > 0.0) {
        return None;
    }
    first_hit_within(mesh, origin, &(direction / len), f64::INFINITY)
}

/// True if the camera-frame segment `from → to` crosses `mesh` placed at `pose`.
pub fn segment_blocked(mesh: &Mesh, pose: &Pose, from: &Vec3, to: &Vec3) -> bool {
    let rt = pose.rotation.transpose();
    let o = rt * (from - pose.translation);
    let e = rt * (to - pose.translation);
    let d = e - o;
    let len = d.norm();
    if len <= RAY_EPSILON {
        return false;
    }
    first_hit_within(mesh, &o, &(d / len), len).is_some()
}
