//! Pose accuracy: ADD, ADD-S, threshold recall and AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Pose, Result, Vec3};

/// Mean distance between corresponding transformed model points.
pub fn add_metric(vertices: &[Vec3], gt: &Pose, est: &Pose) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    vertices.iter().map(|x| (gt.transform_point(x) - est.transform_point(x)).norm()).sum::<f64>() / vertices.len() as f64
}

/// Mean over gt-transformed points of the distance to the closest
/// est-transformed point. Exact nearest neighbour by brute force.
pub fn adds_metric(vertices: &[Vec3], gt: &Pose, est: &Pose) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    let a: Vec<Vec3> = vertices.iter().map(|x| gt.transform_point(x)).collect();
    let b: Vec<Vec3> = vertices.iter().map(|x| est.transform_point(x)).collect();
    let nearest: Vec<f64> = a.par_iter().map(|p| b.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt()).collect();
    // sequential sum: the result must not depend on the thread count
    nearest.iter().sum::<f64>() / vertices.len() as f64
}

/// `true` iff `distance < fraction · diameter`.
pub fn threshold_recall(distance: f64, diameter: f64, fraction: f64) -> bool {
    distance < fraction * diameter
}

pub const RECALL_FRACTIONS: [f64; 3] = [0.02, 0.05, 0.1];
pub const DEFAULT_AUC_MAX: f64 = 0.10;

/// Area under the accuracy-threshold curve on `[0, max_threshold]`,
/// normalized to `[0, 1]`. A distance counts as accurate at threshold `τ`
/// when it is `≤ τ`; infinite distances never do.
///
/// Without interpolation the area is exact: each distance `d < max`
/// contributes `(max - d) / max`. With interpolation it is the mean accuracy
/// at the 11 thresholds `{0, 0.1, ..., 1} · max`.
pub fn auc(distances: &[f64], max_threshold: f64, interpolate: bool) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::invalid("AUC over no distances"));
    }
    if !(max_threshold > 0.0) {
        return Err(Error::invalid("AUC max threshold must be positive"));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::invalid("distances must be non-negative"));
    }
    let n = distances.len() as f64;
    if interpolate {
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        let acc: f64 = (0..=10)
            .map(|k| {
                let t = max_threshold * k as f64 / 10.0;
                sorted.partition_point(|d| *d <= t) as f64 / n
            })
            .sum();
        Ok(acc / 11.0)
    } else {
        Ok(distances.iter().filter(|d| **d < max_threshold).map(|d| (max_threshold - d) / max_threshold).sum::<f64>() / n)
    }
}

/// Metrics of one pose estimate; `None` poses count as failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub add: f64,
    pub add_s: f64,
    /// ADD-S for symmetric objects, ADD otherwise.
    pub add_mixed: f64,
    pub recall_002d: bool,
    pub recall_005d: bool,
    pub recall_01d: bool,
}

impl SceneMetrics {
    pub fn evaluate(vertices: &[Vec3], diameter: f64, symmetric: bool, gt: &Pose, est: Option<&Pose>) -> SceneMetrics {
        let (add, add_s) = match est {
            Some(est) => (add_metric(vertices, gt, est), adds_metric(vertices, gt, est)),
            None => (f64::INFINITY, f64::INFINITY),
        };
        let d = if symmetric { add_s } else { add };
        SceneMetrics {
            add,
            add_s,
            add_mixed: d,
            recall_002d: threshold_recall(d, diameter, 0.02),
            recall_005d: threshold_recall(d, diameter, 0.05),
            recall_01d: threshold_recall(d, diameter, 0.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucPair {
    pub exact: f64,
    pub interpolated: f64,
}

/// Aggregate over scenes. Recalls are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenes: usize,
    pub recall_002d: f64,
    pub recall_005d: f64,
    pub recall_01d: f64,
    /// `None` when more than half of the scenes failed.
    pub median_add: Option<f64>,
    pub median_add_mixed: Option<f64>,
    pub auc_adds: AucPair,
    pub auc_add_s_mixed: AucPair,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl MetricReport {
    pub fn aggregate(scenes: &[SceneMetrics], auc_max: f64) -> Result<MetricReport> {
        if scenes.is_empty() {
            return Err(Error::invalid("no scenes to aggregate"));
        }
        let n = scenes.len() as f64;
        let frac = |f: fn(&SceneMetrics) -> bool| scenes.iter().filter(|s| f(s)).count() as f64 / n;
        let adds: Vec<f64> = scenes.iter().map(|s| s.add_s).collect();
        let mixed: Vec<f64> = scenes.iter().map(|s| s.add_mixed).collect();
        let add: Vec<f64> = scenes.iter().map(|s| s.add).collect();
        Ok(MetricReport {
            scenes: scenes.len(),
            recall_002d: frac(|s| s.recall_002d),
            recall_005d: frac(|s| s.recall_005d),
            recall_01d: frac(|s| s.recall_01d),
            median_add: Some(median(&add)).filter(|m| m.is_finite()),
            median_add_mixed: Some(median(&mixed)).filter(|m| m.is_finite()),
            auc_adds: AucPair { exact: auc(&adds, auc_max, false)?, interpolated: auc(&adds, auc_max, true)? },
            auc_add_s_mixed: AucPair { exact: auc(&mixed, auc_max, false)?, interpolated: auc(&mixed, auc_max, true)? },
        })
    }
}

pub fn median_of(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| median(values))
}
