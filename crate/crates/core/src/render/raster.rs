use rayon::prelude::*;

use crate::camera::MIN_DEPTH;
use crate::{Camera, Error, Mesh, Pose, Result, Vec3};

use super::Scene;

/// Depth difference under which two surfaces count as tied.
pub const DEPTH_TIE: f64 = 1e-9;

/// Row-major depth buffer in meters; 0 marks empty pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub fn empty(width: u32, height: u32) -> Self {
        DepthImage { width, height, depths: vec![0.0; width as usize * height as usize] }
    }

    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.depths[y as usize * self.width as usize + x as usize]
    }
}

/// Row-major binary occupancy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl MaskImage {
    pub fn empty(width: u32, height: u32) -> Self {
        MaskImage { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        MaskImage { width, height, bits: vec![true; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn matches(&self, camera: &Camera) -> bool {
        self.width == camera.width && self.height == camera.height
    }

    pub fn is_subset_of(&self, other: &MaskImage) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

struct ScreenTri {
    p: [(f64, f64); 3],
    inv_z: [f64; 3],
}

fn screen_triangles(mesh: &Mesh, pose: &Pose, camera: &Camera) -> Result<Vec<ScreenTri>> {
    let cam_pts: Vec<Vec3> = mesh.vertices().iter().map(|v| pose.transform_point(v)).collect();
    if let Some(p) = cam_pts.iter().find(|p| p.z <= MIN_DEPTH) {
        return Err(Error::BehindCamera(p.z));
    }
    Ok(mesh
        .faces()
        .iter()
        .map(|f| {
            let q = f.map(|i| cam_pts[i]);
            ScreenTri { p: q.map(|c| (camera.fx * c.x / c.z + camera.cx, camera.fy * c.y / c.z + camera.cy)), inv_z: q.map(|c| 1.0 / c.z) }
        })
        .collect())
}

fn edge(a: (f64, f64), b: (f64, f64), x: f64, y: f64) -> f64 {
    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
}

const BAND_ROWS: usize = 16;

/// Rasterizes every triangle overlapping the rows `y0..y0 + band.len() / width`.
fn raster_band(tris: &[ScreenTri], width: u32, y0: u32, band: &mut [f64]) {
    let rows = (band.len() / width as usize) as u32;
    let (band_lo, band_hi) = (y0 as f64, (y0 + rows - 1) as f64);
    for t in tris {
        let ymin = t.p.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).ceil().max(band_lo);
        let ymax = t.p.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).floor().min(band_hi);
        if ymin > ymax {
            continue;
        }
        let xmin = t.p.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let xmax = t.p.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).floor().min(width as f64 - 1.0);
        if xmin > xmax {
            continue;
        }
        let area = edge(t.p[0], t.p[1], t.p[2].0, t.p[2].1);
        if area == 0.0 {
            continue;
        }
        for y in ymin as u32..=ymax as u32 {
            let yc = y as f64;
            let row = &mut band[((y - y0) * width) as usize..((y - y0 + 1) * width) as usize];
            for x in xmin as u32..=xmax as u32 {
                let xc = x as f64;
                let w0 = edge(t.p[1], t.p[2], xc, yc) / area;
                let w1 = edge(t.p[2], t.p[0], xc, yc) / area;
                let w2 = edge(t.p[0], t.p[1], xc, yc) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                // 1/z is affine in screen space for a planar triangle
                let inv_z = w0 * t.inv_z[0] + w1 * t.inv_z[1] + w2 * t.inv_z[2];
                if inv_z <= 0.0 {
                    continue;
                }
                let z = 1.0 / inv_z;
                let slot = &mut row[x as usize];
                if *slot == 0.0 || z < *slot {
                    *slot = z;
                }
            }
        }
    }
}

/// Z-buffered depth of `mesh` at `pose`, sampled at pixel centers.
///
/// Both triangle orientations are drawn. Bands of rows are rasterized in
/// parallel.
pub fn rasterize_depth(mesh: &Mesh, pose: &Pose, camera: &Camera) -> Result<DepthImage> {
    camera.validate()?;
    let tris = screen_triangles(mesh, pose, camera)?;
    let mut img = DepthImage::empty(camera.width, camera.height);
    let width = camera.width;
    img.depths.par_chunks_mut(width as usize * BAND_ROWS).enumerate().for_each(|(b, band)| raster_band(&tris, width, (b * BAND_ROWS) as u32, band));
    Ok(img)
}

/// Pixels where the target entry is the strictly nearest surface.
///
/// Depth ties within [`DEPTH_TIE`] go to the entry with the lower index.
pub fn render_visible_mask(scene: &Scene, camera: &Camera) -> Result<MaskImage> {
    let depths = scene.entries.iter().map(|e| rasterize_depth(&e.mesh, &e.pose, camera)).collect::<Result<Vec<_>>>()?;
    let target = scene.target_index;
    let mut mask = MaskImage::empty(camera.width, camera.height);
    for (px, bit) in mask.bits.iter_mut().enumerate() {
        let zt = depths[target].depths[px];
        if zt == 0.0 {
            continue;
        }
        *bit = depths.iter().enumerate().all(|(i, d)| {
            let z = d.depths[px];
            i == target || z == 0.0 || z > zt + DEPTH_TIE || (i > target && (z - zt).abs() <= DEPTH_TIE)
        });
    }
    Ok(mask)
}

/// Full silhouette of one mesh, ignoring everything else.
pub fn render_silhouette(mesh: &Mesh, pose: &Pose, camera: &Camera) -> Result<MaskImage> {
    let d = rasterize_depth(mesh, pose, camera)?;
    Ok(MaskImage { width: d.width, height: d.height, bits: d.depths.iter().map(|z| *z > 0.0).collect() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::shapes;
    use crate::render::SceneEntry;

    fn camera() -> Camera {
        Camera::new(200.0, 200.0, 63.5, 63.5, 128, 128).unwrap()
    }

    #[test]
    fn triangle_depth_at_principal_point() {
        let cam = Camera::new(100.0, 100.0, 64.0, 64.0, 128, 128).unwrap();
        let tri =
            Mesh::from_triangles(vec![Vec3::new(-0.2, -0.2, 0.0), Vec3::new(0.3, -0.1, 0.0), Vec3::new(0.0, 0.3, 0.0)], vec![[0, 1, 2]]).unwrap();
        let d = rasterize_depth(&tri, &Pose::from_translation(Vec3::new(0.0, 0.0, 1.0)), &cam).unwrap();
        assert!((d.at(64, 64) - 1.0).abs() < 1e-6);
        assert_eq!(d.at(0, 0), 0.0);
        assert_eq!(d.at(127, 127), 0.0);
    }

    #[test]
    fn sphere_center_depth() {
        // analytic: nearest surface point on the optical axis is t_z - r,
        // and the tessellated sphere has a vertex there
        let r = 0.1;
        let sphere = shapes::icosphere(r, 3);
        let aim = crate::geometry::rotation_looking_along(&sphere.vertices()[0]).transpose();
        let pose = Pose::new(crate::pose::rot_x(std::f64::consts::PI) * aim, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let cam = Camera::new(300.0, 300.0, 64.0, 64.0, 129, 129).unwrap();
        let d = rasterize_depth(&sphere, &pose, &cam).unwrap();
        assert!((d.at(64, 64) - (1.0 - r)).abs() < 1e-3, "{}", d.at(64, 64));
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cube = shapes::cube(1.0);
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 0.3));
        assert!(matches!(rasterize_depth(&cube, &pose, &camera()), Err(Error::BehindCamera(_))));
    }

    #[test]
    fn covering_occluder_empties_mask() {
        let target = Arc::new(shapes::icosphere(0.05, 2));
        let plate = Arc::new(shapes::plate(1.0, 1.0, 1));
        let scene = Scene::new(
            vec![
                SceneEntry { mesh: target.clone(), pose: Pose::from_translation(Vec3::new(0.0, 0.0, 1.0)) },
                SceneEntry { mesh: plate, pose: Pose::from_translation(Vec3::new(0.0, 0.0, 0.5)) },
            ],
            0,
        )
        .unwrap();
        assert_eq!(render_visible_mask(&scene, &camera()).unwrap().count(), 0);
        let alone = Scene::new(vec![scene.entries[0].clone()], 0).unwrap();
        let sil = render_silhouette(&target, &scene.entries[0].pose, &camera()).unwrap();
        assert_eq!(render_visible_mask(&alone, &camera()).unwrap(), sil);
        assert!(sil.count() > 0);
    }

    #[test]
    fn depth_ties_go_to_lower_index() {
        let a = Arc::new(shapes::plate(0.2, 0.2, 1));
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let entries = vec![SceneEntry { mesh: a.clone(), pose }, SceneEntry { mesh: a, pose }];
        let first = Scene::new(entries.clone(), 0).unwrap();
        let second = Scene::new(entries, 1).unwrap();
        assert!(render_visible_mask(&first, &camera()).unwrap().count() > 0);
        assert_eq!(render_visible_mask(&second, &camera()).unwrap().count(), 0);
    }

    #[test]
    fn half_covered_sphere_keeps_about_half() {
        // analytic silhouette: a disc; a plate edge through the center hides half
        let cam = Camera::new(400.0, 400.0, 127.5, 127.5, 256, 256).unwrap();
        let target = Arc::new(shapes::icosphere(0.1, 4));
        let tpose = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let plate = Arc::new(shapes::plate(1.0, 1.0, 1));
        // plate spans x in [0, 1] at z = 0.5: the camera-frame half-space x > 0
        let ppose = Pose::from_translation(Vec3::new(0.5, 0.0, 0.5));
        let scene = Scene::new(vec![SceneEntry { mesh: target.clone(), pose: tpose }, SceneEntry { mesh: plate, pose: ppose }], 0).unwrap();
        let sil = render_silhouette(&target, &tpose, &cam).unwrap();
        let vis = render_visible_mask(&scene, &cam).unwrap();
        let ratio = vis.count() as f64 / sil.count() as f64;
        assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
        assert!(vis.is_subset_of(&sil));
        // silhouette area against the exact projected disc (perspective-corrected radius)
        let rho = 400.0 * 0.1 / (1.0f64 - 0.01).sqrt();
        let disc = std::f64::consts::PI * rho * rho;
        assert!((sil.count() as f64 / disc - 1.0).abs() < 0.1);
    }
}
