//! Visibility-aware keypoint importance via personalized PageRank.
//!
//! A directed k-NN graph over the keypoints gives a column-stochastic
//! transition matrix `T = Aᵀ / k`. With restarts spread uniformly over the
//! visible keypoints, the stationary distribution of the walk solves
//! `r = c T r + (1 - c) s`, i.e. `r = T_ppr s` with
//! `T_ppr = (1 - c)(I - c T)⁻¹`. `T_ppr` depends only on the object, so it
//! is computed once by a dense LU solve and reused for every image.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_K: usize = 20;

/// Directed k-nearest-neighbour graph with its transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    /// Out-neighbours of every node, nearest first.
    neighbors: Vec<Vec<usize>>,
    transition: DMatrix<f64>,
}

/// Edges from each point to its `k` nearest points (Euclidean).
///
/// Equal distances are resolved by the lower point index.
pub fn build_knn_graph(points: &[Vec3], k: usize) -> Result<KnnGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 0 < k < n (k = {k}, n = {n})")));
    }
    let mut neighbors = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let mut others: Vec<(f64, usize)> = points.iter().enumerate().filter(|(j, _)| *j != i).map(|(j, q)| ((p - q).norm_squared(), j)).collect();
        if let Some(&(_, j)) = others.iter().find(|(d, _)| *d == 0.0) {
            return Err(Error::invalid(format!("duplicate keypoints {i} and {j}")));
        }
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        neighbors.push(others[..k].iter().map(|&(_, j)| j).collect());
    }
    Ok(KnnGraph::from_neighbors(neighbors, k))
}

impl KnnGraph {
    /// Graph from explicit out-neighbour lists, each of length `k`.
    pub fn from_neighbor_lists(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        let k = neighbors.first().map_or(0, Vec::len);
        for (i, list) in neighbors.iter().enumerate() {
            if list.len() != k || k == 0 {
                return Err(Error::invalid(format!("node {i} does not have exactly k = {k} out-edges")));
            }
            let mut seen = list.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != k || list.iter().any(|&j| j == i || j >= n) {
                return Err(Error::invalid(format!("node {i} has self, repeated or out-of-range edges")));
            }
        }
        Ok(KnnGraph::from_neighbors(neighbors, k))
    }

    fn from_neighbors(neighbors: Vec<Vec<usize>>, k: usize) -> Self {
        let n = neighbors.len();
        let mut transition = DMatrix::zeros(n, n);
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                // T = Aᵀ / k: column i spreads node i's mass over its out-edges
                transition[(j, i)] = 1.0 / k as f64;
            }
        }
        KnnGraph { k, neighbors, transition }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Binary adjacency, `A[i][j] = 1` iff edge `i → j`.
    pub fn adjacency(&self) -> DMatrix<u8> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                a[(i, j)] = 1;
            }
        }
        a
    }

    /// One `"i j"` line per edge, sources ascending, nearest target first.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            for j in list {
                out.push_str(&format!("{i} {j}\n"));
            }
        }
        out
    }

    /// `T x` without touching the dense matrix.
    fn apply_transition(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let w = 1.0 / self.k as f64;
        for (i, list) in self.neighbors.iter().enumerate() {
            let share = x[i] * w;
            for &j in list {
                out[j] += share;
            }
        }
    }
}

/// A k-NN graph with its precomputed `T_ppr` for one damping factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PprGraph {
    pub graph: KnnGraph,
    damping: f64,
    ppr: DMatrix<f64>,
}

impl PprGraph {
    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn ppr_matrix(&self) -> &DMatrix<f64> {
        &self.ppr
    }
}

fn check_damping(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!("damping factor must lie in (0, 1), got {c}")));
    }
    Ok(())
}

/// Solves `(I - cT) X = (1 - c) I` densely and keeps `X = T_ppr`.
pub fn precompute_ppr(graph: KnnGraph, c: f64) -> Result<PprGraph> {
    check_damping(c)?;
    let n = graph.len();
    let system = DMatrix::identity(n, n) - graph.transition() * c;
    let rhs = DMatrix::identity(n, n) * (1.0 - c);
    let ppr = system.clone().lu().solve(&rhs).ok_or_else(|| Error::Numerical("I - cT is singular".into()))?;
    let residual = (&system * &ppr - &rhs).abs().max();
    if residual > 1e-8 {
        return Err(Error::Numerical(format!("T_ppr residual {residual:e} exceeds 1e-8")));
    }
    Ok(PprGraph { graph, damping: c, ppr })
}

/// Uniform restart distribution over the visible keypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RestartVector {
    s: Vec<f64>,
}

impl RestartVector {
    /// `1 / N_vis` on visible keypoints, 0 elsewhere.
    pub fn from_visibility(visible: &[bool]) -> Result<Self> {
        let count = visible.iter().filter(|v| **v).count();
        if count == 0 {
            return Err(Error::EmptyRestartSupport);
        }
        let w = 1.0 / count as f64;
        Ok(RestartVector { s: visible.iter().map(|&v| if v { w } else { 0.0 }).collect() })
    }

    /// Arbitrary restart distribution; must be non-negative and sum to 1.
    pub fn from_weights(s: Vec<f64>) -> Result<Self> {
        if s.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("restart weights must be non-negative"));
        }
        let sum: f64 = s.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("restart weights sum to {sum}, not 1")));
        }
        Ok(RestartVector { s })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Stationary visiting probabilities; serialized as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImportanceVector {
    pub r: Vec<f64>,
}

impl ImportanceVector {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.r.iter().sum()
    }
}

/// `r = T_ppr s`.
///
/// Entries within 1e-12 below zero (LU rounding) are clamped to zero.
pub fn importance(ppr: &PprGraph, s: &RestartVector) -> Result<ImportanceVector> {
    let n = ppr.graph.len();
    if s.len() != n {
        return Err(Error::invalid(format!("restart vector has {} entries, graph has {n} nodes", s.len())));
    }
    let r = &ppr.ppr * DVector::from_column_slice(s.as_slice());
    let r: Vec<f64> = r.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
    if r.iter().any(|v| *v < 0.0) {
        return Err(Error::Numerical("negative importance".into()));
    }
    Ok(ImportanceVector { r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub importance: ImportanceVector,
    pub iterations: usize,
}

/// Fixed-point iteration `r ← c T r + (1 - c) s` from `r = s`, stopping once
/// the L1 change drops below `tol`.
pub fn power_iteration_ppr(graph: &KnnGraph, s: &RestartVector, c: f64, tol: f64, max_iters: usize) -> Result<PowerIteration> {
    check_damping(c)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if s.len() != graph.len() {
        return Err(Error::invalid("restart vector length does not match graph"));
    }
    let s = s.as_slice();
    let mut r = s.to_vec();
    let mut tr = vec![0.0; r.len()];
    for iter in 1..=max_iters {
        graph.apply_transition(&r, &mut tr);
        let mut change = 0.0;
        for ((ri, ti), si) in r.iter_mut().zip(&tr).zip(s) {
            let next = c * ti + (1.0 - c) * si;
            change += (next - *ri).abs();
            *ri = next;
        }
        if change < tol {
            return Ok(PowerIteration { importance: ImportanceVector { r }, iterations: iter });
        }
    }
    Err(Error::Numerical(format!("power iteration did not converge in {max_iters} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cycle() -> KnnGraph {
        KnnGraph::from_neighbor_lists(vec![vec![1], vec![0]]).unwrap()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    /// Ring of `n` points on a circle: every k-NN neighbourhood is symmetric.
    pub(crate) fn ring(n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn collinear_nearest_neighbours() {
        // brute force: |0-1| = 1, |0-3| = 3, |1-3| = 2
        let pts = [0.0, 1.0, 3.0].map(|x| Vec3::new(x, 0.0, 0.0));
        let g = build_knn_graph(&pts, 1).unwrap();
        assert_eq!(g.edge_list(), "0 1\n1 0\n2 1\n");
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let g = build_knn_graph(&random_points(6, 1), 5).unwrap();
        let a = g.adjacency();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a[(i, j)], (i != j) as u8);
            }
        }
    }

    #[test]
    fn graph_invariants_at_default_size() {
        let g = build_knn_graph(&random_points(512, 2), 20).unwrap();
        let a = g.adjacency();
        for i in 0..512 {
            assert_eq!(a.row(i).iter().map(|&x| x as usize).sum::<usize>(), 20);
            assert_eq!(a[(i, i)], 0);
            assert!((g.transition().column(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = random_points(4, 3);
        assert!(build_knn_graph(&pts, 4).is_err());
        assert!(build_knn_graph(&pts, 0).is_err());
        let dup = vec![pts[0], pts[1], pts[0]];
        assert!(build_knn_graph(&dup, 1).is_err());
        assert!(precompute_ppr(two_cycle(), 1.0).is_err());
        assert!(precompute_ppr(two_cycle(), 0.0).is_err());
        assert!(KnnGraph::from_neighbor_lists(vec![vec![0], vec![0]]).is_err());
    }

    #[test]
    fn two_cycle_closed_form() {
        // (1-c) (I - cT)^-1 with T = [[0,1],[1,0]]: (1-c)/(1-c²) [[1,c],[c,1]]
        let c = 0.85;
        let p = precompute_ppr(two_cycle(), c).unwrap();
        let diag = 1.0 / (1.0 + c);
        let off = c / (1.0 + c);
        assert!((diag - 0.540_540_540_540_540_5).abs() < 1e-15);
        let m = p.ppr_matrix();
        assert!((m[(0, 0)] - diag).abs() < 1e-12 && (m[(1, 1)] - diag).abs() < 1e-12);
        assert!((m[(0, 1)] - off).abs() < 1e-12 && (m[(1, 0)] - off).abs() < 1e-12);
        let r = importance(&p, &RestartVector::from_weights(vec![1.0, 0.0]).unwrap()).unwrap();
        assert!((r.r[0] - diag).abs() < 1e-12 && (r.r[1] - off).abs() < 1e-12);
        let it = power_iteration_ppr(&p.graph, &RestartVector::from_weights(vec![1.0, 0.0]).unwrap(), c, 1e-13, 10_000).unwrap();
        assert!((it.importance.r[0] - diag).abs() < 1e-12);
    }

    #[test]
    fn small_damping_is_nearly_identity() {
        let g = build_knn_graph(&random_points(30, 4), 5).unwrap();
        let p = precompute_ppr(g, 0.01).unwrap();
        let dev = (p.ppr_matrix() - DMatrix::<f64>::identity(30, 30)).abs().max();
        assert!(dev < 0.02, "{dev}");
    }

    #[test]
    fn ppr_columns_are_stochastic() {
        for seed in 0..5 {
            let g = build_knn_graph(&random_points(100, seed), 7).unwrap();
            let p = precompute_ppr(g, 0.85).unwrap();
            for col in p.ppr_matrix().column_iter() {
                assert!((col.sum() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn restart_vector_examples() {
        assert_eq!(RestartVector::from_visibility(&[true, false, true]).unwrap().as_slice(), &[0.5, 0.0, 0.5]);
        assert_eq!(RestartVector::from_visibility(&[true; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert!(matches!(RestartVector::from_visibility(&[false; 3]), Err(Error::EmptyRestartSupport)));
        assert!(RestartVector::from_weights(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn uniform_restart_on_ring_is_uniform() {
        let g = build_knn_graph(&ring(40), 4).unwrap();
        let p = precompute_ppr(g, 0.85).unwrap();
        let s = RestartVector::from_visibility(&[true; 40]).unwrap();
        let r = importance(&p, &s).unwrap();
        assert!(r.r.iter().all(|v| (v - 1.0 / 40.0).abs() < 1e-9));
        // s is already the fixed point: one step changes nothing
        let it = power_iteration_ppr(&p.graph, &s, 0.85, 1e-12, 10).unwrap();
        assert_eq!(it.iterations, 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = precompute_ppr(two_cycle(), 0.85).unwrap();
        let s = RestartVector::from_visibility(&[true, false, true]).unwrap();
        assert!(importance(&p, &s).is_err());
        assert!(power_iteration_ppr(&p.graph, &s, 0.85, 1e-9, 10).is_err());
    }

    #[test]
    fn power_iteration_respects_contraction_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let g = build_knn_graph(&random_points(120, 100 + seed), 5).unwrap();
            let vis: Vec<bool> = (0..120).map(|_| rng.random_bool(0.4)).collect();
            let s = RestartVector::from_visibility(&vis).unwrap();
            for &(c, tol) in &[(0.85, 1e-10), (0.5, 1e-6), (0.9, 1e-12)] {
                let it = power_iteration_ppr(&g, &s, c, tol, 100_000).unwrap();
                let bound = (tol.ln() / c.ln()).ceil() as usize + 1;
                assert!(it.iterations <= bound, "{} > {bound}", it.iterations);
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = build_knn_graph(&random_points(50, 5), 5).unwrap();
        let s = RestartVector::from_visibility(&[true, false].repeat(25)).unwrap();
        assert!(matches!(power_iteration_ppr(&g, &s, 0.85, 1e-15, 3), Err(Error::Numerical(_))));
    }
}
