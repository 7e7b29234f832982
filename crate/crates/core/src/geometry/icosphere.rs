use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::pose::check_rotation;
use crate::{Error, Mat3, Result, Vec3};

/// Unit vertices and faces of a subdivided icosahedron.
pub(crate) fn icosphere_unit(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// `10·4^level + 2` unit directions, roughly uniform on the sphere.
pub fn icosphere_directions(level: u32) -> Vec<Vec3> {
    icosphere_unit(level).0
}

/// Rotations sharing one property: their third column is a given direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSet {
    pub rotations: Vec<Mat3>,
}

impl RotationSet {
    pub fn new(rotations: Vec<Mat3>) -> Result<Self> {
        for (i, r) in rotations.iter().enumerate() {
            check_rotation(r, 1e-9).map_err(|e| Error::invalid(format!("rotation {i}: {e}")))?;
        }
        Ok(RotationSet { rotations })
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

/// Rotation with third column `dir` and zero roll about it.
///
/// The first column is `up × dir` with `up = +y`, or `+x` when `dir` is
/// parallel to `+y`.
pub fn rotation_looking_along(dir: &Vec3) -> Mat3 {
    let d = dir.normalize();
    let mut x = Vec3::y().cross(&d);
    if x.norm() < 1e-9 {
        x = Vec3::x().cross(&d);
    }
    let x = x.normalize();
    let y = d.cross(&x);
    Mat3::from_columns(&[x, y, d])
}

/// One rotation per icosphere vertex: 12 at level 0, 2562 at level 4.
pub fn icosphere_rotation_sample(level: u32) -> RotationSet {
    RotationSet { rotations: icosphere_directions(level).iter().map(rotation_looking_along).collect() }
}
