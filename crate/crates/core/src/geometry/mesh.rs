use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

const UNIT_TOL: f64 = 1e-6;
const MIN_FACE_AREA: f64 = 1e-12;

/// Triangle mesh in meters, object frame, with unit vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Vec<Vec3>) -> Result<Self> {
        check_faces(&vertices, &faces)?;
        if normals.len() != vertices.len() {
            return Err(Error::invalid(format!("{} normals for {} vertices", normals.len(), vertices.len())));
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::invalid(format!("vertex normal {i} is not unit length")));
        }
        Ok(Mesh { vertices, faces, normals })
    }

    /// Builds a mesh and fills in area-weighted vertex normals.
    pub fn from_triangles(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let normals = compute_vertex_normals(&vertices, &faces)?;
        Ok(Mesh { vertices, faces, normals })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Largest distance of any vertex from the origin.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Copy with every vertex and normal rotated by `q` (object frame change).
    pub fn rotated(&self, q: &Mat3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| q * v).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|n| (q * n).normalize()).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Mesh> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let vertices: Vec<Vec3> = self.vertices.iter().map(|v| v * factor).collect();
        check_faces(&vertices, &self.faces)?;
        Ok(Mesh { vertices, faces: self.faces.clone(), normals: self.normals.clone() })
    }

    /// The whole vertex set as a keypoint set, in vertex order.
    pub fn all_vertices_as_keypoints(&self) -> KeypointSet {
        KeypointSet { points: self.vertices.clone(), normals: self.normals.clone(), source_indices: (0..self.vertices.len()).collect() }
    }
}

fn face_area_normal(vertices: &[Vec3], f: &[usize; 3]) -> Vec3 {
    let [a, b, c] = *f;
    (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]))
}

fn check_faces(vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    if faces.is_empty() {
        return Err(Error::invalid("mesh has no faces"));
    }
    if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
        return Err(Error::invalid("mesh has non-finite vertex coordinates"));
    }
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= vertices.len()) {
            return Err(Error::invalid(format!("face {fi} references a missing vertex")));
        }
        let area = 0.5 * face_area_normal(vertices, f).norm();
        if !(area > MIN_FACE_AREA) {
            return Err(Error::invalid(format!("face {fi} is degenerate (area {area:e})")));
        }
    }
    Ok(())
}

/// Area-weighted average of incident face normals, normalized.
///
/// The unnormalized cross product of two edges already carries twice the face
/// area, so summing it gives the area weighting directly.
pub fn compute_vertex_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<Vec<Vec3>> {
    check_faces(vertices, faces)?;
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    let mut touched = vec![false; vertices.len()];
    for f in faces {
        let n = face_area_normal(vertices, f);
        for &i in f {
            acc[i] += n;
            touched[i] = true;
        }
    }
    if let Some(i) = touched.iter().position(|t| !t) {
        return Err(Error::IsolatedVertex(i));
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > 0.0 {
                Ok(n / len)
            } else {
                Err(Error::Degenerate(format!("incident face normals cancel at vertex {i}")))
            }
        })
        .collect()
}

/// Sampled surface keypoints with unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Index of the originating mesh vertex for every keypoint.
    pub source_indices: Vec<usize>,
}

impl KeypointSet {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>, source_indices: Vec<usize>) -> Result<Self> {
        let set = KeypointSet { points, normals, source_indices };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.normals.len() != n || self.source_indices.len() != n {
            return Err(Error::invalid("keypoint field lengths differ"));
        }
        if let Some(i) = self.normals.iter().position(|v| (v.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::invalid(format!("keypoint normal {i} is not unit length")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> KeypointSet {
        KeypointSet {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            source_indices: indices.iter().map(|&i| self.source_indices[i]).collect(),
        }
    }

    pub fn rotated(&self, q: &Mat3) -> KeypointSet {
        KeypointSet {
            points: self.points.iter().map(|p| q * p).collect(),
            normals: self.normals.iter().map(|n| (q * n).normalize()).collect(),
            source_indices: self.source_indices.clone(),
        }
    }
}
