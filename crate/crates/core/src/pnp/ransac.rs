use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epnp, refine_pose, reprojection_errors, CorrespondenceSet, PoseEstimate};
use crate::{Camera, Error, Pose, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Pixels; inliers satisfy `error <= threshold`.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig { iterations: 400, threshold: 2.0, seed: 0 }
    }
}

const MIN_SAMPLE: usize = 4;
const REFINE_ROUNDS: usize = 5;
/// Refinement fits points within this multiple of the inlier threshold.
const REFINE_SUPPORT: f64 = 2.0;

fn inliers_of(pose: &Pose, camera: &Camera, cs: &CorrespondenceSet, threshold: f64) -> Vec<bool> {
    reprojection_errors(pose, camera, cs).iter().map(|e| *e <= threshold).collect()
}

fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|v| **v).count()
}

/// Truncated quadratic loss; lower is better.
fn msac_score(pose: &Pose, camera: &Camera, cs: &CorrespondenceSet, threshold: f64) -> f64 {
    let cap = threshold * threshold;
    reprojection_errors(pose, camera, cs).iter().map(|e| (e * e).min(cap)).sum()
}

/// Best 4-point EPnP hypothesis under a truncated quadratic loss, then
/// re-estimated (EPnP followed by reprojection-error minimization) on the
/// points within a wider band around the threshold while that lowers the loss. Inliers are the points with
/// `error <= threshold` under the final pose.
pub fn ransac_pnp(cs: &CorrespondenceSet, camera: &Camera, config: &RansacConfig) -> Result<PoseEstimate> {
    let n = cs.len();
    if n < MIN_SAMPLE {
        return Err(Error::invalid(format!("RANSAC needs at least {MIN_SAMPLE} correspondences, got {n}")));
    }
    if !(config.threshold > 0.0) || config.iterations == 0 {
        return Err(Error::invalid("RANSAC needs positive iterations and threshold"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, Pose)> = None;
    for _ in 0..config.iterations {
        let idx = sample(&mut rng, n, MIN_SAMPLE).into_vec();
        let Ok(pose) = epnp(&cs.subset(&idx), camera) else { continue };
        let score = msac_score(&pose, camera, cs, config.threshold);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, pose));
        }
    }
    let (_, mut pose) = best.ok_or_else(|| Error::PoseNotFound("no valid hypothesis".into()))?;
    let mut flags = inliers_of(&pose, camera, cs, config.threshold);
    if count(&flags) < MIN_SAMPLE {
        return Err(Error::PoseNotFound(format!("best hypothesis has {} inliers", count(&flags))));
    }
    let wide = REFINE_SUPPORT * config.threshold;
    let mut best_score = msac_score(&pose, camera, cs, wide);
    let mut support = inliers_of(&pose, camera, cs, wide);
    for _ in 0..REFINE_ROUNDS {
        let idx: Vec<usize> = (0..n).filter(|&i| support[i]).collect();
        let support_set = cs.subset(&idx);
        let Ok(linear) = epnp(&support_set, camera) else { break };
        let refined = refine_pose(&linear, camera, &support_set);
        let score = msac_score(&refined, camera, cs, wide);
        if score >= best_score {
            break;
        }
        let new_flags = inliers_of(&refined, camera, cs, config.threshold);
        if count(&new_flags) < MIN_SAMPLE {
            break;
        }
        let new_support = inliers_of(&refined, camera, cs, wide);
        let changed = new_support != support;
        pose = refined;
        flags = new_flags;
        support = new_support;
        best_score = score;
        if !changed {
            break;
        }
    }
    let inlier_count = count(&flags);
    let errs = reprojection_errors(&pose, camera, cs);
    let mean = errs.iter().zip(&flags).filter(|(_, f)| **f).map(|(e, _)| e).sum::<f64>() / inlier_count as f64;
    Ok(PoseEstimate { pose, inliers: flags, mean_reprojection_error: mean })
}
