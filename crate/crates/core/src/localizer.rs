//! Simulated keypoint localizer: visible keypoints land close to their true
//! projection, invisible ones are noisier and sometimes far off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Camera, Error, KeypointSet, Pixel, Pose, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_visible: f64,
    pub sigma_invisible: f64,
    pub outlier_rate_invisible: f64,
    pub outlier_radius: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma_visible: 1.0, sigma_invisible: 8.0, outlier_rate_invisible: 0.2, outlier_radius: 32.0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { sigma_visible: 0.0, sigma_invisible: 0.0, outlier_rate_invisible: 0.0, outlier_radius: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_visible >= 0.0
            && self.sigma_invisible >= 0.0
            && (0.0..=1.0).contains(&self.outlier_rate_invisible)
            && self.outlier_radius >= 0.0
            && self.sigma_visible.is_finite()
            && self.sigma_invisible.is_finite()
            && self.outlier_radius.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise model {self:?}")))
        }
    }
}

/// One estimated pixel per keypoint, deterministic in `seed`.
///
/// A keypoint behind the camera cannot be projected; it is reported at the
/// image corner so that RANSAC treats it as an outlier.
pub fn simulate_localization(
    keypoints: &KeypointSet,
    pose: &Pose,
    camera: &Camera,
    visible: &[bool],
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<Pixel>> {
    noise.validate()?;
    if visible.len() != keypoints.len() {
        return Err(Error::invalid(format!("{} visibility flags for {} keypoints", visible.len(), keypoints.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let border = Pixel::new(camera.width as f64 - 1.0, camera.height as f64 - 1.0);
    let mut out = Vec::with_capacity(keypoints.len());
    for (p, &vis) in keypoints.points.iter().zip(visible) {
        // draw a fixed number of variates per keypoint so streams stay aligned
        let (g1, g2): (f64, f64) = (unit.sample(&mut rng), unit.sample(&mut rng));
        let (u_out, u_r, u_a): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let Ok(truth) = camera.project_camera(&pose.transform_point(p)) else {
            out.push(border);
            continue;
        };
        let sigma = if vis { noise.sigma_visible } else { noise.sigma_invisible };
        let mut center = truth;
        if !vis && u_out < noise.outlier_rate_invisible {
            // uniform over the disc
            let r = noise.outlier_radius * u_r.sqrt();
            let a = std::f64::consts::TAU * u_a;
            center += Pixel::new(r * a.cos(), r * a.sin());
        }
        out.push(center + Pixel::new(sigma * g1, sigma * g2));
    }
    Ok(out)
}
