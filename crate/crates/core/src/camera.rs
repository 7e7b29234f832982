//! Pinhole camera intrinsics.
//!
//! Pixel `(i, j)` has its center at continuous coordinate `(i, j)`; a
//! projected point belongs to the pixel obtained by rounding.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Pixel, Result, Vec3};

/// Camera-frame depth below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let cam = Camera { fx, fy, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    /// Square image with the principal point at the center pixel.
    pub fn centered(focal: f64, size: u32) -> Result<Self> {
        let c = (size as f64 - 1.0) / 2.0;
        Camera::new(focal, focal, c, c, size, size)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::invalid("camera focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera image size must be at least 1x1"));
        }
        Ok(())
    }

    pub fn k_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn from_k(k: &Mat3, width: u32, height: u32) -> Result<Self> {
        Camera::new(k[(0, 0)], k[(1, 1)], k[(0, 2)], k[(1, 2)], width, height)
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, p: &Vec3) -> Result<Pixel> {
        if p.z <= MIN_DEPTH {
            return Err(Error::BehindCamera(p.z));
        }
        Ok(Pixel::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Camera-frame point at depth `z` along the ray through `pixel`.
    pub fn unproject(&self, pixel: &Pixel, z: f64) -> Vec3 {
        Vec3::new((pixel.x - self.cx) / self.fx * z, (pixel.y - self.cy) / self.fy * z, z)
    }

    /// Nearest pixel containing `pixel`, if inside the image.
    pub fn pixel_index(&self, pixel: &Pixel) -> Option<(u32, u32)> {
        let u = pixel.x.round();
        let v = pixel.y.round();
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return None;
        }
        Some((u as u32, v as u32))
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}
