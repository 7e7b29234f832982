//! Procedural test meshes: spheres, boxes, tori, cylinders and plates.

use std::f64::consts::TAU;

use crate::{Mesh, Vec3};

use super::icosphere::icosphere_unit;

/// Icosphere of the given radius, centered at the origin.
pub fn icosphere(radius: f64, level: u32) -> Mesh {
    let (v, f) = icosphere_unit(level);
    let v = v.into_iter().map(|p| p * radius).collect();
    Mesh::from_triangles(v, f).expect("icosphere is a valid mesh")
}

/// Axis-aligned cube centered at the origin.
pub fn cube(side: f64) -> Mesh {
    cuboid(Vec3::repeat(side))
}

/// Axis-aligned box centered at the origin with outward faces.
///
/// Every face diagonal joins the two even-parity corners of that face, so all
/// corners see the same incident area on their three faces and their
/// area-weighted normals point along the box diagonals.
pub fn cuboid(size: Vec3) -> Mesh {
    let h = size / 2.0;
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        vertices.push(Vec3::new(sx * h.x, sy * h.y, sz * h.z));
    }
    let parity = |i: usize| (i & 1) ^ ((i >> 1) & 1) ^ ((i >> 2) & 1);
    // quads wound counter-clockwise seen from outside
    let quads: [[usize; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        if parity(q[0]) == 0 {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        } else {
            faces.push([q[1], q[2], q[3]]);
            faces.push([q[1], q[3], q[0]]);
        }
    }
    Mesh::from_triangles(vertices, faces).expect("box is a valid mesh")
}

/// Torus around the z axis.
pub fn torus(major_radius: f64, minor_radius: f64, major_segments: usize, minor_segments: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = TAU * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let v = TAU * j as f64 / minor_segments as f64;
            let r = major_radius + minor_radius * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor_radius * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % major_segments) * minor_segments + (j % minor_segments);
    let mut faces = Vec::with_capacity(2 * major_segments * minor_segments);
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::from_triangles(vertices, faces).expect("torus is a valid mesh")
}

/// Closed cylinder along z, centered at the origin, with capped ends.
///
/// `rings` intermediate vertex rings are placed along the side so the
/// surface has vertices away from the cap edges.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> Mesh {
    let levels = rings + 2;
    let mut vertices = Vec::with_capacity(segments * levels + 2);
    for l in 0..levels {
        let z = -height / 2.0 + height * l as f64 / (levels - 1) as f64;
        for s in 0..segments {
            let a = TAU * s as f64 / segments as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, -height / 2.0));
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, height / 2.0));
    let idx = |l: usize, s: usize| l * segments + s % segments;
    let mut faces = Vec::new();
    for l in 0..levels - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (idx(l, s), idx(l, s + 1), idx(l + 1, s + 1), idx(l + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for s in 0..segments {
        faces.push([bottom, idx(0, s + 1), idx(0, s)]);
        faces.push([top, idx(levels - 1, s), idx(levels - 1, s + 1)]);
    }
    Mesh::from_triangles(vertices, faces).expect("cylinder is a valid mesh")
}

/// Flat rectangle in the z = 0 plane facing +z, split into a grid so that it
/// has interior vertices.
pub fn plate(width: f64, height: f64, cells: usize) -> Mesh {
    let cells = cells.max(1);
    let mut vertices = Vec::with_capacity((cells + 1) * (cells + 1));
    for j in 0..=cells {
        for i in 0..=cells {
            vertices.push(Vec3::new(width * (i as f64 / cells as f64 - 0.5), height * (j as f64 / cells as f64 - 0.5), 0.0));
        }
    }
    let idx = |i: usize, j: usize| j * (cells + 1) + i;
    let mut faces = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::from_triangles(vertices, faces).expect("plate is a valid mesh")
}
