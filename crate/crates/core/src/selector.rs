//! Inference-time key-fragment extraction.
//!
//! Scores are ranked, the top centers are picked (optionally suppressing
//! centers closer than the maximum offset to an already accepted one), and
//! each center `c` with score `p` is grown to
//! `[max(1, ⌈c − p·l_max⌉), min(T, ⌊c + p·r_max⌋)]`.
//! Timesteps in fragments are 1-based and bounds are inclusive.

use serde::{Deserialize, Serialize};

use crate::data_io::Interval;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub trial_id: String,
    pub center: usize,
    pub left: usize,
    pub right: usize,
    pub score: f64,
}

impl Fragment {
    /// The 0-based half-open sample range `[left − 1, right)`.
    pub fn interval(&self) -> Interval {
        Interval::new(self.left - 1, self.right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub k: usize,
    pub l_max: usize,
    pub r_max: usize,
    pub nms: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            k: 10,
            l_max: 8,
            r_max: 8,
            nms: true,
        }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("select.k must be >= 1".into()));
        }
        Ok(())
    }

    fn suppression_radius(&self) -> usize {
        self.l_max.max(self.r_max)
    }
}

/// Grows a 1-based `center` into a fragment by score-scaled offsets.
pub fn expand_fragment(
    trial_id: &str,
    center: usize,
    score: f64,
    l_max: usize,
    r_max: usize,
    length: usize,
) -> Fragment {
    assert!(center >= 1 && center <= length, "center {center} outside [1, {length}]");
    let c = center as f64;
    let left_offset = c - score * l_max as f64;
    let right_offset = c + score * r_max as f64;
    let left = (left_offset.ceil().max(1.0) as usize).min(center);
    let right = (right_offset.floor().min(length as f64) as usize).max(center);
    Fragment {
        trial_id: trial_id.to_string(),
        center,
        left,
        right,
        score,
    }
}

/// 0-based timestep indices sorted by descending score, ties by index.
pub fn ranked_timesteps(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Top-`k` fragments of one trial, sorted by center.
pub fn select(trial_id: &str, scores: &[f64], cfg: &SelectConfig) -> Vec<Fragment> {
    let length = scores.len();
    let radius = cfg.suppression_radius();
    let mut centers: Vec<usize> = Vec::with_capacity(cfg.k);
    for t in ranked_timesteps(scores) {
        if centers.len() == cfg.k {
            break;
        }
        if cfg.nms && centers.iter().any(|&c| c.abs_diff(t) <= radius) {
            continue;
        }
        centers.push(t);
    }
    centers.sort_unstable();
    centers
        .into_iter()
        .map(|t| expand_fragment(trial_id, t + 1, scores[t], cfg.l_max, cfg.r_max, length))
        .collect()
}

/// Baseline selector: uniform random scores fed through [`select`].
pub fn select_random(trial_id: &str, length: usize, cfg: &SelectConfig, rng: &mut Rng) -> Vec<Fragment> {
    let scores: Vec<f64> = (0..length).map(|_| rng.uniform()).collect();
    select(trial_id, &scores, cfg)
}

/// Deduplicated, sorted 0-based sample indices covered by `fragments`.
pub fn sampled_indices(fragments: &[Fragment]) -> Vec<usize> {
    let mut idx: Vec<usize> = fragments
        .iter()
        .flat_map(|f| (f.left - 1)..f.right)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}
