//! Rigid object-to-camera transforms.

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Tolerance for orthonormality and unit determinant checks.
pub const ROTATION_TOL: f64 = 1e-9;

/// Object-to-camera pose: `x_cam = R * x_obj + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    /// Validated constructor; rejects matrices that are not proper rotations.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOL)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        Ok(Pose { rotation, translation })
    }

    pub fn identity() -> Self {
        Pose { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose { rotation: Mat3::identity(), translation }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `Rᵀ t`: the translation expressed in the object frame.
    pub fn object_frame_translation(&self) -> Vec3 {
        self.rotation.transpose() * self.translation
    }

    /// Right-multiplies the rotation (object-frame change), keeping `t`.
    pub fn with_object_rotation(&self, s: &Mat3) -> Pose {
        Pose { rotation: self.rotation * s, translation: self.translation }
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_error(&self, other: &Pose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }

    pub fn translation_error(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Rotation as 9 row-major floats.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> Result<Self> {
        Pose::new(Mat3::from_row_slice(r), Vec3::new(t[0], t[1], t[2]))
    }
}

pub fn check_rotation(r: &Mat3, tol: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("rotation has non-finite entries"));
    }
    let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
    if ortho > tol {
        return Err(Error::invalid(format!("rotation is not orthonormal (|RᵀR - I| = {ortho:e})")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::invalid(format!("rotation determinant {det} != +1")));
    }
    Ok(())
}

/// Angle of a rotation matrix, robust near 0 and π.
pub fn rotation_angle(r: &Mat3) -> f64 {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5 * Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    sin.atan2(cos)
}

pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Uniformly distributed random rotation (Shoemake's quaternion method).
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> Mat3 {
    use std::f64::consts::TAU;
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::Quaternion::new(b * (TAU * u3).cos(), a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin());
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Projects a near-rotation onto SO(3) via SVD.
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_reflection() {
        let m = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(m, Vec3::zeros()).is_err());
    }

    #[test]
    fn random_rotations_are_proper() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            check_rotation(&r, 1e-12).unwrap();
        }
    }

    #[test]
    fn rotation_angle_matches_construction() {
        for &a in &[0.0, 1e-8, 0.3, 2.0, std::f64::consts::PI - 1e-7] {
            let r = axis_angle(&Vec3::new(1.0, 2.0, -0.5), a);
            assert!((rotation_angle(&r) - a).abs() < 1e-9, "{a}");
        }
    }

    #[test]
    fn elementary_rotations_agree_with_axis_angle() {
        let a = 0.7;
        assert!((rot_x(a) - axis_angle(&Vec3::x(), a)).abs().max() < 1e-15);
        assert!((rot_y(a) - axis_angle(&Vec3::y(), a)).abs().max() < 1e-15);
        assert!((rot_z(a) - axis_angle(&Vec3::z(), a)).abs().max() < 1e-15);
    }
}
