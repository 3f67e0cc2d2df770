//! Inference and evaluation shared by the command line and the test
//! harnesses: score trials, extract fragments, pool, cluster and score.

use std::collections::HashMap;

use crate::agent::{forward, AgentParams};
use crate::clustering::metrics::matched_count;
use crate::clustering::{cluster_by_samples, pool_trial, spectral_cluster, ClusterConfig, Granularity, Scores};
use crate::data_io::{Trial, TrialSet};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use crate::selector::{sampled_indices, select, select_random, Fragment, SelectConfig};

/// Importance scores for every trial, in set order.
pub fn score_trials(set: &TrialSet, params: &AgentParams) -> Result<Vec<Vec<f64>>> {
    set.trials
        .iter()
        .map(|t| Ok(forward(t, params)?.0.into_vec()))
        .collect()
}

/// Top-K fragments per trial from precomputed scores.
pub fn select_fragments(set: &TrialSet, scores: &[Vec<f64>], cfg: &SelectConfig) -> Result<Vec<Vec<Fragment>>> {
    cfg.validate()?;
    if scores.len() != set.len() {
        return Err(Error::dims("select_fragments", set.len(), scores.len()));
    }
    set.trials
        .iter()
        .zip(scores)
        .map(|(t, s)| {
            if s.len() != t.len() {
                return Err(Error::Load {
                    trial: Some(t.id.clone()),
                    msg: format!("{} scores for {} samples", s.len(), t.len()),
                });
            }
            Ok(select(&t.id, s, cfg))
        })
        .collect()
}

/// Baseline fragments from uniform random scores with the same K and offsets.
/// Trial `i` draws from `Rng::new(seed).fork(i)`.
pub fn random_fragments(set: &TrialSet, cfg: &SelectConfig, seed: u64) -> Result<Vec<Vec<Fragment>>> {
    cfg.validate()?;
    let root = Rng::new(seed);
    Ok(set
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| select_random(&t.id, t.len(), cfg, &mut root.fork(i as u64)))
        .collect())
}

/// Splits a flat fragment list into per-trial lists in set order. Fragments
/// naming unknown trials are rejected.
pub fn group_fragments(set: &TrialSet, fragments: &[Fragment]) -> Result<Vec<Vec<Fragment>>> {
    let index: HashMap<&str, usize> = set.trials.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    let mut out = vec![Vec::new(); set.len()];
    for f in fragments {
        let &i = index.get(f.trial_id.as_str()).ok_or_else(|| Error::Load {
            trial: Some(f.trial_id.clone()),
            msg: "fragment refers to a trial missing from the dataset".into(),
        })?;
        let len = set.trials[i].len();
        if f.left == 0 || f.left > f.center || f.center > f.right || f.right > len {
            return Err(Error::Load {
                trial: Some(f.trial_id.clone()),
                msg: format!("fragment [{}, {}] (center {}) outside 1..={len}", f.left, f.right, f.center),
            });
        }
        out[i].push(f.clone());
    }
    Ok(out)
}

/// Truth intervals matched at `tau` and the number of truth intervals,
/// summed over trials. `None` when any trial lacks truth intervals.
pub fn recall_counts(set: &TrialSet, fragments: &[Vec<Fragment>], tau: f64) -> Result<Option<(usize, usize)>> {
    let (mut matched, mut total) = (0, 0);
    for (t, frags) in set.trials.iter().zip(fragments) {
        let Some(truth) = &t.truth_intervals else {
            return Ok(None);
        };
        let predicted: Vec<_> = frags.iter().map(Fragment::interval).collect();
        matched += matched_count(&predicted, truth, tau)?;
        total += truth.len();
    }
    Ok((total > 0).then_some((matched, total)))
}

/// Pooled trial vectors, using fragments when given.
pub fn trial_vectors(set: &TrialSet, fragments: Option<&[Vec<Fragment>]>) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = set
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| pool_trial(t, fragments.map_or(&[][..], |f| &f[i])))
        .collect::<Result<_>>()?;
    Matrix::from_rows(&rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub cluster: ClusterConfig,
    pub granularity: Granularity,
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            granularity: Granularity::Trial,
            tau: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// One cluster id per trial.
    pub assignments: Vec<usize>,
    pub scores: Option<Scores>,
    pub recall: Option<f64>,
}

fn class_count(set: &TrialSet) -> Result<usize> {
    if let Some(c) = set.class_count {
        return Ok(c);
    }
    set.labels()
        .and_then(|l| l.into_iter().max())
        .map(|m| m + 1)
        .ok_or_else(|| Error::Config("the dataset declares no class_count and has no labels".into()))
}

/// Clusters the trials (on fragments when `fragments` is given, else on the
/// whole trials) and scores against labels and truth intervals when present.
pub fn evaluate(set: &TrialSet, fragments: Option<&[Vec<Fragment>]>, cfg: &EvalConfig, seed: u64) -> Result<EvalReport> {
    if let Some(f) = fragments {
        if f.len() != set.len() {
            return Err(Error::dims("evaluate", set.len(), f.len()));
        }
    }
    let c = class_count(set)?;
    let assignments = match cfg.granularity {
        Granularity::Trial => spectral_cluster(&trial_vectors(set, fragments)?, c, &cfg.cluster, seed)?.assignments,
        Granularity::Sample => {
            let trials: Vec<&Trial> = set.trials.iter().collect();
            let sets: Vec<Vec<usize>> = match fragments {
                Some(f) => f.iter().map(|fr| sampled_indices(fr)).collect(),
                None => vec![Vec::new(); set.len()],
            };
            cluster_by_samples(&trials, &sets, c, &cfg.cluster, seed)?
        }
    };
    let scores = match set.labels() {
        Some(labels) => Some(crate::clustering::align_and_score(&assignments, &labels, c)?),
        None => None,
    };
    let recall = match fragments {
        Some(f) => recall_counts(set, f, cfg.tau)?.map(|(m, t)| m as f64 / t as f64),
        None => None,
    };
    Ok(EvalReport {
        assignments,
        scores,
        recall,
    })
}
