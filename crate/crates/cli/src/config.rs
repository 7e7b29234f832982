//! Run configuration: defaults, `key = value` files, flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use viskp_core::localizer::NoiseModel;
use viskp_core::metrics::DEFAULT_AUC_MAX;
use viskp_core::pnp::RansacConfig;
use viskp_core::selection::{SelectionConfig, DEFAULT_FALLBACK_RATIO};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub n_select: usize,
    pub fallback_threshold: f64,
    pub noise: NoiseModel,
    pub ransac_iters: usize,
    pub reproj_thresh: f64,
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Never affects results.
    #[serde(skip)]
    pub jobs: usize,
    pub auc_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 512,
            k: 20,
            c: 0.85,
            n_select: 256,
            fallback_threshold: DEFAULT_FALLBACK_RATIO,
            noise: NoiseModel::default(),
            ransac_iters: 400,
            reproj_thresh: 2.0,
            seed: 0,
            jobs: 0,
            auc_max: DEFAULT_AUC_MAX,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "c" => self.c = parse(key, value)?,
            "n-select" => self.n_select = parse(key, value)?,
            "fallback-threshold" => self.fallback_threshold = parse(key, value)?,
            "sigma-visible" => self.noise.sigma_visible = parse(key, value)?,
            "sigma-invisible" => self.noise.sigma_invisible = parse(key, value)?,
            "outlier-rate" => self.noise.outlier_rate_invisible = parse(key, value)?,
            "outlier-radius" => self.noise.outlier_radius = parse(key, value)?,
            "ransac-iters" => self.ransac_iters = parse(key, value)?,
            "reproj-thresh" => self.reproj_thresh = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "auc-max" => self.auc_max = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.n == 0 {
            return bad("--n must be positive".into());
        }
        if self.k == 0 {
            return bad("--k must be positive".into());
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad("--c must lie in (0, 1)".into());
        }
        if self.n_select == 0 {
            return bad("--n-select must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fallback_threshold) {
            return bad("--fallback-threshold must lie in [0, 1]".into());
        }
        if self.noise.validate().is_err() {
            return bad("noise parameters out of range".into());
        }
        if self.ransac_iters == 0 || !(self.reproj_thresh > 0.0) {
            return bad("RANSAC iterations and threshold must be positive".into());
        }
        if !(self.auc_max > 0.0) {
            return bad("--auc-max must be positive".into());
        }
        Ok(())
    }

    /// Checks that depend on the number of keypoints actually in use.
    pub fn validate_for(&self, n: usize) -> CliResult<()> {
        if self.k >= n {
            return Err(CliError::Usage(format!("--k must be in 1..{n}")));
        }
        if self.n_select > n {
            return Err(CliError::Usage(format!("--n-select must be in 1..={n}")));
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig { n_select: self.n_select, fallback_ratio_threshold: self.fallback_threshold }
    }

    pub fn ransac(&self, seed: u64) -> RansacConfig {
        RansacConfig { iterations: self.ransac_iters, threshold: self.reproj_thresh, seed }
    }
}
