//! Symmetry-consistent pose canonicalization.
//!
//! Symmetric objects admit many equivalent annotated poses that produce very
//! different visibility labels. Among the equivalents we pick the one whose
//! fixed keypoint subset `P_sym` is most internally visible.
//!
//! Because `-d·n = pᵀn + (Rᵀt)ᵀn`, only the second term depends on the
//! choice. For a continuous symmetry about z, right-multiplying by `Rz(θ)`
//! turns that term for the reference normal `x̂` into `a cos θ + b sin θ`
//! with `(a, b)` the first two entries of `Rᵀt`, minimized in closed form.
//! A second continuous axis (y) is handled the same way with reference
//! normal `ẑ`. Finite symmetries are enumerated.
//!
//! All canonicalization functions below expect an axis-aligned object frame
//! (first continuous axis = z, second = y); [`Canonicalizer`] does the
//! alignment for arbitrary frames.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::RotationSet;
use crate::pose::{axis_angle, check_rotation, rot_x, rot_y, rot_z};
use crate::visibility::internal_visibility;
use crate::{Error, KeypointSet, Mat3, Mesh, Pose, Result, Vec3};

const SPEC_TOL: f64 = 1e-9;

/// Symmetry transformations of an object, in its own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymmetrySpecJson", into = "SymmetrySpecJson")]
pub struct SymmetrySpec {
    discrete: Vec<Mat3>,
    continuous_axes: Vec<Vec3>,
}

impl SymmetrySpec {
    /// Validates the transforms and axes. The identity is moved to the front
    /// of `discrete` so that ties in the enumeration keep the pose as is.
    pub fn new(discrete: Vec<Mat3>, continuous_axes: Vec<Vec3>) -> Result<Self> {
        for (i, s) in discrete.iter().enumerate() {
            check_rotation(s, SPEC_TOL).map_err(|e| Error::invalid(format!("discrete transform {i}: {e}")))?;
        }
        let id = discrete
            .iter()
            .position(|s| (s - Mat3::identity()).abs().max() <= SPEC_TOL)
            .ok_or_else(|| Error::invalid("discrete transforms must include the identity"))?;
        let mut ordered = Vec::with_capacity(discrete.len());
        ordered.push(Mat3::identity());
        ordered.extend(discrete.iter().enumerate().filter(|(i, _)| *i != id).map(|(_, s)| *s));

        if continuous_axes.len() > 2 {
            return Err(Error::invalid("at most two continuous symmetry axes"));
        }
        if continuous_axes.iter().any(|a| (a.norm() - 1.0).abs() > SPEC_TOL) {
            return Err(Error::invalid("continuous symmetry axes must be unit vectors"));
        }
        if continuous_axes.len() == 2 && continuous_axes[0].dot(&continuous_axes[1]).abs() > SPEC_TOL {
            return Err(Error::invalid("two continuous symmetry axes must be orthogonal"));
        }
        Ok(SymmetrySpec { discrete: ordered, continuous_axes })
    }

    pub fn asymmetric() -> Self {
        SymmetrySpec { discrete: vec![Mat3::identity()], continuous_axes: Vec::new() }
    }

    /// Identity first, then the remaining transforms in input order.
    pub fn discrete(&self) -> &[Mat3] {
        &self.discrete
    }

    pub fn continuous_axes(&self) -> &[Vec3] {
        &self.continuous_axes
    }

    pub fn is_asymmetric(&self) -> bool {
        self.discrete.len() == 1 && self.continuous_axes.is_empty()
    }

    pub fn has_discrete(&self) -> bool {
        self.discrete.len() > 1
    }

    /// The same symmetries seen from a frame rotated by `q`.
    pub fn conjugated(&self, q: &Mat3) -> SymmetrySpec {
        SymmetrySpec {
            discrete: self.discrete.iter().map(|s| q * s * q.transpose()).collect(),
            continuous_axes: self.continuous_axes.iter().map(|a| (q * a).normalize()).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SymmetrySpecJson {
    discrete: Vec<[f64; 9]>,
    continuous_axes: Vec<[f64; 3]>,
}

impl TryFrom<SymmetrySpecJson> for SymmetrySpec {
    type Error = Error;

    fn try_from(raw: SymmetrySpecJson) -> Result<Self> {
        SymmetrySpec::new(
            raw.discrete.iter().map(|m| Mat3::from_row_slice(m)).collect(),
            raw.continuous_axes.iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect(),
        )
    }
}

impl From<SymmetrySpec> for SymmetrySpecJson {
    fn from(spec: SymmetrySpec) -> Self {
        SymmetrySpecJson {
            discrete: spec
                .discrete
                .iter()
                .map(|m| {
                    let mut out = [0.0; 9];
                    for r in 0..3 {
                        for c in 0..3 {
                            out[3 * r + c] = m[(r, c)];
                        }
                    }
                    out
                })
                .collect(),
            continuous_axes: spec.continuous_axes.iter().map(|a| [a.x, a.y, a.z]).collect(),
        }
    }
}

/// Fixed keypoint subset whose internal visibility drives the choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymSubset {
    pub indices: Vec<usize>,
}

impl SymSubset {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::invalid("symmetry subset is empty"));
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::invalid("symmetry subset index out of range"));
        }
        Ok(SymSubset { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Angle minimizing `a cos θ + b sin θ`, in `[0, 2π)`.
///
/// `a = b = 0` leaves every angle optimal; 0 is returned.
pub fn canonical_angle_ab(a: f64, b: f64) -> f64 {
    let theta = if a == 0.0 && b == 0.0 {
        0.0
    } else if a == 0.0 {
        PI / 2.0 + if b > 0.0 { PI } else { 0.0 }
    } else {
        (b / a).atan() + if a > 0.0 { PI } else { 0.0 }
    };
    theta.rem_euclid(TAU)
}

/// Canonical rotation about the (aligned) z axis for `pose`.
pub fn canonical_angle(pose: &Pose) -> f64 {
    let v = pose.object_frame_translation();
    canonical_angle_ab(v.x, v.y)
}

/// `R̃ = R Rz(θ)` with θ from [`canonical_angle`]; `t` unchanged.
pub fn canonicalize_continuous(pose: &Pose) -> Pose {
    pose.with_object_rotation(&rot_z(canonical_angle(pose)))
}

/// Angle about the (aligned) y axis: minimizes `(R̃ᵀt)ᵀ Ry(φ) ẑ`, which is
/// `a cos φ + b sin φ` with `a, b` the third and first entries of `R̃ᵀt`.
pub fn canonical_second_angle(pose: &Pose) -> f64 {
    let v = pose.object_frame_translation();
    canonical_angle_ab(v.z, v.x)
}

/// `R̃ Ry(φ)` with φ from [`canonical_second_angle`].
pub fn canonicalize_second_axis(pose: &Pose) -> Pose {
    pose.with_object_rotation(&rot_y(canonical_second_angle(pose)))
}

/// Number of subset keypoints passing the back-face test under `pose`.
fn subset_visible_count(pose: &Pose, subset: &SymSubset, keypoints: &KeypointSet) -> usize {
    subset.indices.iter().filter(|&&i| (-pose.transform_point(&keypoints.points[i])).dot(&pose.transform_vector(&keypoints.normals[i])) > 0.0).count()
}

/// Picks `R S` over the finite transforms maximizing the visible count in
/// `P_sym`; ties go to the lower transform index.
pub fn canonicalize_discrete(pose: &Pose, spec: &SymmetrySpec, subset: &SymSubset, keypoints: &KeypointSet) -> Pose {
    let mut best = *pose;
    let mut best_count = None;
    for s in spec.discrete() {
        let candidate = pose.with_object_rotation(s);
        let count = subset_visible_count(&candidate, subset, keypoints);
        if best_count.is_none_or(|b| count > b) {
            best = candidate;
            best_count = Some(count);
        }
    }
    best
}

/// Continuous z axis, then the second axis, then the finite transforms, each
/// only if the spec has it. `subset` is required only for the finite step.
pub fn canonicalize(pose: &Pose, spec: &SymmetrySpec, subset: Option<&SymSubset>, keypoints: &KeypointSet) -> Result<Pose> {
    let mut out = *pose;
    if !spec.continuous_axes().is_empty() {
        out = canonicalize_continuous(&out);
    }
    if spec.continuous_axes().len() == 2 {
        out = canonicalize_second_axis(&out);
    }
    if spec.has_discrete() {
        let subset = subset.ok_or_else(|| Error::invalid("finite symmetries need a P_sym subset"))?;
        if subset.indices.last().is_some_and(|&i| i >= keypoints.len()) {
            return Err(Error::invalid("P_sym index exceeds keypoint count"));
        }
        out = canonicalize_discrete(&out, spec, subset, keypoints);
    }
    Ok(out)
}

/// Largest internally visible subset over sampled viewing directions.
///
/// Each rotation `Rᵢ` of the set is a camera orientation in the object frame
/// (its third column is the viewing direction), so the object pose is
/// `(Rᵢᵀ, t)`. The visible set of the first rotation attaining the maximum
/// count is returned.
pub fn build_sym_subset(keypoints: &KeypointSet, rotations: &RotationSet, translation: &Vec3) -> Result<SymSubset> {
    if !(translation.z > 0.0) {
        return Err(Error::invalid("P_sym translation must have positive depth"));
    }
    let counts: Vec<usize> = rotations
        .rotations
        .par_iter()
        .map(|r| {
            let pose = Pose { rotation: r.transpose(), translation: *translation };
            internal_visibility(keypoints, &pose).iter().filter(|v| **v).count()
        })
        .collect();
    let mut best = None;
    for (i, &c) in counts.iter().enumerate() {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    let (idx, count) = best.ok_or_else(|| Error::invalid("empty rotation set"))?;
    if count == 0 {
        return Err(Error::Degenerate("no keypoint is visible from any sampled view".into()));
    }
    let pose = Pose { rotation: rotations.rotations[idx].transpose(), translation: *translation };
    let indices = internal_visibility(keypoints, &pose).iter().enumerate().filter_map(|(i, v)| v.then_some(i)).collect();
    SymSubset::new(indices, keypoints.len())
}

/// Fixed P_sym translation: straight ahead at 2.5 object diameters.
pub fn sym_subset_translation(diameter: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, 2.5 * diameter)
}

/// Rotation mapping the first continuous axis to +z and the second, if any,
/// to +y. Identity when there is no axis or the axis already is +z.
pub fn alignment_rotation(spec: &SymmetrySpec) -> Mat3 {
    let axes = spec.continuous_axes();
    match axes.len() {
        0 => Mat3::identity(),
        1 => {
            let a = axes[0];
            if (a - Vec3::z()).norm() <= 1e-15 {
                return Mat3::identity();
            }
            let cross = a.cross(&Vec3::z());
            if cross.norm() < 1e-12 {
                // antiparallel: any half-turn about a perpendicular axis
                return rot_x(PI);
            }
            axis_angle(&cross, a.dot(&Vec3::z()).clamp(-1.0, 1.0).acos())
        }
        _ => {
            let (z_axis, y_axis) = (axes[0], axes[1]);
            let x_axis = y_axis.cross(&z_axis);
            Mat3::from_columns(&[x_axis, y_axis, z_axis]).transpose()
        }
    }
}

/// Mesh, keypoints and spec re-expressed in the axis-aligned frame.
#[derive(Debug, Clone)]
pub struct AxisAlignment {
    /// Maps original object coordinates to aligned ones.
    pub rotation: Mat3,
    pub mesh: Mesh,
    pub keypoints: KeypointSet,
    pub spec: SymmetrySpec,
}

pub fn axis_align(spec: &SymmetrySpec, mesh: &Mesh, keypoints: &KeypointSet) -> AxisAlignment {
    let q = alignment_rotation(spec);
    AxisAlignment { rotation: q, mesh: mesh.rotated(&q), keypoints: keypoints.rotated(&q), spec: spec.conjugated(&q) }
}

/// Canonicalizes annotated poses of one object, in its original frame.
#[derive(Debug, Clone)]
pub struct Canonicalizer {
    alignment: Mat3,
    spec: SymmetrySpec,
    keypoints: KeypointSet,
    subset: Option<SymSubset>,
}

impl Canonicalizer {
    /// Aligns the frame and, for finite symmetries, builds `P_sym` from the
    /// 2562-view icosphere sample at 2.5 diameters.
    pub fn new(spec: &SymmetrySpec, keypoints: &KeypointSet, diameter: f64) -> Result<Self> {
        let q = alignment_rotation(spec);
        let aligned = keypoints.rotated(&q);
        let subset = if spec.has_discrete() {
            let rotations = crate::geometry::icosphere_rotation_sample(4);
            Some(build_sym_subset(&aligned, &rotations, &sym_subset_translation(diameter))?)
        } else {
            None
        };
        Ok(Canonicalizer { alignment: q, spec: spec.conjugated(&q), keypoints: aligned, subset })
    }

    pub fn subset(&self) -> Option<&SymSubset> {
        self.subset.as_ref()
    }

    pub fn canonicalize(&self, pose: &Pose) -> Result<Pose> {
        if self.spec.is_asymmetric() {
            return Ok(*pose);
        }
        let q = &self.alignment;
        // x_cam = R x = (R Qᵀ)(Q x)
        let aligned = Pose { rotation: pose.rotation * q.transpose(), translation: pose.translation };
        let out = canonicalize(&aligned, &self.spec, self.subset.as_ref(), &self.keypoints)?;
        Ok(Pose { rotation: out.rotation * q, translation: out.translation })
    }
}
