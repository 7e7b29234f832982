use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{reprojection_errors, CorrespondenceSet};
use crate::pose::orthonormalize;
use crate::{Camera, Error, Mat3, Pose, Result, Vec3};

const PLANAR_RATIO: f64 = 1e-10;
const COLLINEAR_RATIO: f64 = 1e-12;
const GN_ITERS: usize = 10;

/// EPnP with four control points (three for planar point sets).
///
/// Betas are initialized by the three linearized approximations and refined
/// by Gauss-Newton; the candidate with the lowest mean reprojection error
/// wins.
pub fn epnp(cs: &CorrespondenceSet, camera: &Camera) -> Result<Pose> {
    let n = cs.len();
    if n < 4 {
        return Err(Error::invalid(format!("EPnP needs at least 4 correspondences, got {n}")));
    }
    let control = control_points(&cs.points3d)?;
    let nc = control.world.len();
    let alphas = barycentric(&cs.points3d, &control);

    // M x = 0 with x the stacked camera-frame control points
    let mut m = DMatrix::<f64>::zeros(2 * n, 3 * nc);
    for (i, (a, px)) in alphas.iter().zip(&cs.pixels2d).enumerate() {
        let u = (px.x - camera.cx) / camera.fx;
        let v = (px.y - camera.cy) / camera.fy;
        for (j, &aj) in a.iter().enumerate() {
            m[(2 * i, 3 * j)] = aj;
            m[(2 * i, 3 * j + 2)] = -u * aj;
            m[(2 * i + 1, 3 * j + 1)] = aj;
            m[(2 * i + 1, 3 * j + 2)] = -v * aj;
        }
    }
    let mtm = m.transpose() * &m;
    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..3 * nc).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // as many null vectors as needed to pin the pairwise distances
    let nv = if nc == 4 { 4 } else { 3 };
    let basis: Vec<DVector<f64>> = order[..nv].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();

    let pairs: Vec<(usize, usize)> = (0..nc).flat_map(|i| (i + 1..nc).map(move |j| (i, j))).collect();
    let dist2: Vec<f64> = pairs.iter().map(|&(i, j)| (control.world[i] - control.world[j]).norm_squared()).collect();
    let dv: Vec<Vec<Vec3>> = pairs
        .iter()
        .map(|&(i, j)| basis.iter().map(|v| Vec3::new(v[3 * i] - v[3 * j], v[3 * i + 1] - v[3 * j + 1], v[3 * i + 2] - v[3 * j + 2])).collect())
        .collect();

    let mut starts = beta_approximations(&dv, &dist2, nv);
    // with few points the null space is large and the linearized starts can
    // miss; single null vectors, fit to scale, are cheap extra starts
    for k in 0..nv {
        let num: f64 = dv.iter().zip(&dist2).map(|(d, w)| d[k].norm_squared() * w).sum();
        let den: f64 = dv.iter().map(|d| d[k].norm_squared().powi(2)).sum();
        if den > 0.0 {
            let mut b = vec![0.0; nv];
            b[k] = (num / den).sqrt();
            starts.push(b);
        }
    }
    let mut best: Option<(f64, Pose)> = None;
    for init in starts {
        let betas = gauss_newton(&dv, &dist2, init);
        let Some(pose) = pose_from_betas(&betas, &basis, &alphas, &cs.points3d, nc) else { continue };
        let err = reprojection_errors(&pose, camera, cs).iter().sum::<f64>() / n as f64;
        if err.is_finite() && best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, pose));
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| Error::Degenerate("EPnP produced no valid pose".into()))
}

struct ControlPoints {
    world: Vec<Vec3>,
    /// Principal axes scaled to the control-point offsets.
    axes: Vec<Vec3>,
}

fn control_points(points: &[Vec3]) -> Result<ControlPoints> {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lam: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    if lam[0] <= 0.0 || lam[1] <= COLLINEAR_RATIO * lam[0] {
        return Err(Error::Degenerate("correspondence points are collinear".into()));
    }
    let used = if lam[2] <= PLANAR_RATIO * lam[0] { 2 } else { 3 };
    let axes: Vec<Vec3> = (0..used).map(|k| eig.eigenvectors.column(order[k]).into_owned() * lam[k].sqrt()).collect();
    let mut world = vec![centroid];
    world.extend(axes.iter().map(|a| centroid + a));
    Ok(ControlPoints { world, axes })
}

fn barycentric(points: &[Vec3], control: &ControlPoints) -> Vec<Vec<f64>> {
    let c0 = control.world[0];
    points
        .iter()
        .map(|p| {
            let d = p - c0;
            // axes are orthogonal, so each coefficient is a projection
            let rest: Vec<f64> = control.axes.iter().map(|a| d.dot(a) / a.norm_squared()).collect();
            let mut out = vec![1.0 - rest.iter().sum::<f64>()];
            out.extend(rest);
            out
        })
        .collect()
}

/// Index of `β_k β_l` (k ≤ l) in the linearized unknown vector.
fn pair_col(k: usize, l: usize) -> usize {
    let (k, l) = if k <= l { (k, l) } else { (l, k) };
    l * (l + 1) / 2 + k
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(b, 1e-14).ok()
}

/// Initial betas from linearized sub-systems using 1, 2 or 3 null vectors.
fn beta_approximations(dv: &[Vec<Vec3>], dist2: &[f64], nv: usize) -> Vec<Vec<f64>> {
    let rows = dv.len();
    let mut l = DMatrix::<f64>::zeros(rows, nv * (nv + 1) / 2);
    for (r, d) in dv.iter().enumerate() {
        for k in 0..nv {
            for m in k..nv {
                l[(r, pair_col(k, m))] = if k == m { d[k].norm_squared() } else { 2.0 * d[k].dot(&d[m]) };
            }
        }
    }
    let rho = DVector::from_column_slice(dist2);
    let cols = |c: &[usize]| DMatrix::from_fn(rows, c.len(), |r, j| l[(r, c[j])]);
    let mut out = Vec::new();

    // β1 with the products β1βk, k = 1..nv
    let c1: Vec<usize> = (0..nv).map(|k| pair_col(0, k)).collect();
    if let Some(b) = lstsq(&cols(&c1), &rho) {
        let mut betas = vec![0.0; nv];
        let s = if b[0] < 0.0 { -1.0 } else { 1.0 };
        betas[0] = (s * b[0]).sqrt();
        if betas[0] > 0.0 {
            for k in 1..nv {
                betas[k] = s * b[k] / betas[0];
            }
        }
        out.push(betas);
    }

    // β1, β2 from b11, b12, b22
    let c2 = [pair_col(0, 0), pair_col(0, 1), pair_col(1, 1)];
    let two = lstsq(&cols(&c2), &rho).map(|b| {
        let (b0, b1) = if b[0] < 0.0 {
            ((-b[0]).sqrt(), if b[2] < 0.0 { (-b[2]).sqrt() } else { 0.0 })
        } else {
            (b[0].sqrt(), if b[2] > 0.0 { b[2].sqrt() } else { 0.0 })
        };
        let b0 = if b[1] < 0.0 { -b0 } else { b0 };
        (b0, b1)
    });
    if let Some((b0, b1)) = two {
        let mut betas = vec![0.0; nv];
        betas[0] = b0;
        betas[1] = b1;
        out.push(betas);
    }

    // adds β3 via b13 when there are enough distance equations
    if rows >= 5 {
        let c3 = [pair_col(0, 0), pair_col(0, 1), pair_col(1, 1), pair_col(0, 2), pair_col(1, 2)];
        if let Some(b) = lstsq(&cols(&c3), &rho) {
            let (mut b0, b1) = if b[0] < 0.0 {
                ((-b[0]).sqrt(), if b[2] < 0.0 { (-b[2]).sqrt() } else { 0.0 })
            } else {
                (b[0].sqrt(), if b[2] > 0.0 { b[2].sqrt() } else { 0.0 })
            };
            if b[1] < 0.0 {
                b0 = -b0;
            }
            let mut betas = vec![0.0; nv];
            betas[0] = b0;
            betas[1] = b1;
            betas[2] = if b0 != 0.0 { b[3] / b0 } else { 0.0 };
            out.push(betas);
        }
    }
    out
}

fn gauss_newton(dv: &[Vec<Vec3>], dist2: &[f64], mut betas: Vec<f64>) -> Vec<f64> {
    let nv = betas.len();
    let rows = dv.len();
    for _ in 0..GN_ITERS {
        let mut jac = DMatrix::<f64>::zeros(rows, nv);
        let mut res = DVector::<f64>::zeros(rows);
        for (r, d) in dv.iter().enumerate() {
            let delta = d.iter().zip(&betas).fold(Vec3::zeros(), |a, (v, b)| a + v * *b);
            res[r] = delta.norm_squared() - dist2[r];
            for k in 0..nv {
                jac[(r, k)] = 2.0 * delta.dot(&d[k]);
            }
        }
        let Some(step) = lstsq(&jac, &(-res)) else { break };
        for (b, s) in betas.iter_mut().zip(step.iter()) {
            *b += s;
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
    betas
}

fn pose_from_betas(betas: &[f64], basis: &[DVector<f64>], alphas: &[Vec<f64>], world: &[Vec3], nc: usize) -> Option<Pose> {
    let x = basis.iter().zip(betas).fold(DVector::<f64>::zeros(3 * nc), |a, (v, b)| a + v * *b);
    let cc: Vec<Vec3> = (0..nc).map(|j| Vec3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2])).collect();
    let mut cam: Vec<Vec3> = alphas.iter().map(|a| a.iter().zip(&cc).fold(Vec3::zeros(), |s, (w, c)| s + c * *w)).collect();
    if cam.iter().map(|p| p.z).sum::<f64>() < 0.0 {
        for p in &mut cam {
            *p = -*p;
        }
    }
    procrustes(world, &cam)
}

/// Rigid transform taking `world` onto `cam` in the least-squares sense.
fn procrustes(world: &[Vec3], cam: &[Vec3]) -> Option<Pose> {
    let n = world.len() as f64;
    let cw = world.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cc = cam.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Mat3::zeros();
    for (w, c) in world.iter().zip(cam) {
        h += (c - cc) * (w - cw).transpose();
    }
    if !h.iter().all(|v| v.is_finite()) || h.norm() == 0.0 {
        return None;
    }
    let r = orthonormalize(&h);
    let t = cc - r * cw;
    Pose::new(r, t).ok()
}
