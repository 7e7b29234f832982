use crate::{Error, Result, Vec3};

use super::{KeypointSet, Mesh};

/// Greedy farthest point sampling over mesh vertices.
///
/// Starts at `seed_index`; every further pick maximizes the Euclidean
/// distance to the already chosen set, ties going to the lowest vertex index.
pub fn farthest_point_sampling(mesh: &Mesh, n: usize, seed_index: usize) -> Result<KeypointSet> {
    let order = farthest_point_sampling_points(mesh.vertices(), n, seed_index)?;
    Ok(KeypointSet {
        points: order.iter().map(|&i| mesh.vertices()[i]).collect(),
        normals: order.iter().map(|&i| mesh.normals()[i]).collect(),
        source_indices: order,
    })
}

/// FPS over a bare point list; returns indices in pick order.
pub fn farthest_point_sampling_points(points: &[Vec3], n: usize, seed_index: usize) -> Result<Vec<usize>> {
    if n > points.len() {
        return Err(Error::invalid(format!("cannot sample {n} points from {}", points.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if seed_index >= points.len() {
        return Err(Error::invalid(format!("seed index {seed_index} out of range")));
    }
    let mut chosen = Vec::with_capacity(n);
    let mut min_dist = vec![f64::INFINITY; points.len()];
    let mut current = seed_index;
    loop {
        chosen.push(current);
        if chosen.len() == n {
            break;
        }
        min_dist[current] = f64::NEG_INFINITY;
        let anchor = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (p, d)) in points.iter().zip(min_dist.iter_mut()).enumerate() {
            if *d == f64::NEG_INFINITY {
                continue;
            }
            let dist = (p - anchor).norm_squared();
            if dist < *d {
                *d = dist;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    Ok(chosen)
}

/// Maximum pairwise vertex distance.
pub fn object_diameter(mesh: &Mesh) -> f64 {
    let v = mesh.vertices();
    let mut best = 0.0f64;
    for (i, a) in v.iter().enumerate() {
        for b in &v[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}
