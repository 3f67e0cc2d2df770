//! Synthetic trials with planted class-specific fragments.
//!
//! Background samples are i.i.d. `N(0, I_D)`. Inside every planted interval
//! the trial's class direction (a unit vector) scaled by `signal_to_noise`
//! is added to each sample. Ground-truth intervals and labels are recorded.

use serde::{Deserialize, Serialize};

use crate::data_io::{Interval, Trial, TrialSet};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub trial_count: usize,
    pub length: usize,
    pub feature_dim: usize,
    pub class_count: usize,
    pub fragments_per_trial: usize,
    pub fragment_len_range: (usize, usize),
    pub signal_to_noise: f64,
    /// Trials are split into this many contiguous subject groups, each drawn
    /// from its own generator stream.
    pub subjects: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The default benchmark preset.
    fn default() -> Self {
        Self {
            trial_count: 30,
            length: 240,
            feature_dim: 16,
            class_count: 2,
            fragments_per_trial: 1,
            fragment_len_range: (12, 20),
            signal_to_noise: 2.0,
            subjects: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.fragment_len_range;
        let fail = |m: String| Err(Error::Config(m));
        if self.trial_count == 0 || self.length == 0 || self.feature_dim == 0 {
            return fail("trial_count, length and feature_dim must be positive".into());
        }
        if self.class_count == 0 {
            return fail("class_count must be positive".into());
        }
        if self.subjects == 0 || self.subjects > self.trial_count {
            return fail(format!("subjects must be in [1, {}]", self.trial_count));
        }
        if lo == 0 || lo > hi {
            return fail(format!("fragment_len_range [{lo}, {hi}] is not a valid range"));
        }
        // Worst case: every fragment at max length, separated by one sample.
        let k = self.fragments_per_trial;
        if k > 0 && k * hi + (k - 1) > self.length {
            return fail(format!(
                "cannot pack {k} fragments of up to {hi} samples into a trial of length {}",
                self.length
            ));
        }
        if !(self.signal_to_noise >= 0.0) || !self.signal_to_noise.is_finite() {
            return fail("signal_to_noise must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Unit class directions: the first `class_count` rows of a seeded random
/// orthonormal basis (Gram–Schmidt on Gaussian rows). Classes beyond `D`
/// get plain random unit vectors.
pub fn class_directions(class_count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed).fork(0xD1_4EC7);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(class_count);
    while basis.len() < class_count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if basis.len() < dim {
            for b in &basis {
                let proj = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let n = norm(&v);
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    basis
}

/// Balanced labels (counts differ by at most one) in a seeded order.
fn balanced_labels(n: usize, classes: usize, rng: &mut Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    rng.shuffle(&mut labels);
    labels
}

/// Non-overlapping intervals with at least one background sample between
/// neighbours, lengths uniform in `[lo, hi]`.
fn place_fragments(cfg: &SynthConfig, rng: &mut Rng) -> Vec<Interval> {
    let k = cfg.fragments_per_trial;
    if k == 0 {
        return vec![];
    }
    let (lo, hi) = cfg.fragment_len_range;
    let lengths: Vec<usize> = (0..k).map(|_| lo + rng.below(hi - lo + 1)).collect();
    let occupied: usize = lengths.iter().sum::<usize>() + (k - 1);
    let slack = cfg.length - occupied;
    // Split the slack into k + 1 gaps (stars and bars).
    let mut cuts: Vec<usize> = (0..k).map(|_| rng.below(slack + 1)).collect();
    cuts.sort_unstable();
    let mut intervals = Vec::with_capacity(k);
    let mut cursor = 0;
    let mut prev_cut = 0;
    for (i, (&len, &cut)) in lengths.iter().zip(&cuts).enumerate() {
        cursor += cut - prev_cut;
        prev_cut = cut;
        if i > 0 {
            cursor += 1;
        }
        intervals.push(Interval::new(cursor, cursor + len));
        cursor += len;
    }
    intervals
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<TrialSet> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let directions = class_directions(cfg.class_count, cfg.feature_dim, cfg.seed);
    let labels = balanced_labels(cfg.trial_count, cfg.class_count, &mut root.fork(1));
    let mut trials = Vec::with_capacity(cfg.trial_count);
    for (i, &label) in labels.iter().enumerate() {
        let subject = i * cfg.subjects / cfg.trial_count;
        let mut rng = root.fork(1_000 + subject as u64).fork(i as u64);
        let intervals = place_fragments(cfg, &mut rng);
        let mut features = Matrix::from_fn(cfg.length, cfg.feature_dim, |_, _| rng.normal());
        let dir = &directions[label];
        for iv in &intervals {
            for t in iv.start..iv.end {
                features
                    .row_mut(t)
                    .iter_mut()
                    .zip(dir)
                    .for_each(|(x, u)| *x += cfg.signal_to_noise * u);
            }
        }
        let id = if cfg.subjects > 1 {
            format!("s{subject:02}_t{i:03}")
        } else {
            format!("t{i:03}")
        };
        let mut trial = Trial::new(id, features, Some(label), Some(intervals))?;
        if cfg.subjects > 1 {
            trial = trial.with_subject(format!("s{subject:02}"));
        }
        trials.push(trial);
    }
    TrialSet::new(trials, cfg.feature_dim, Some(cfg.class_count))
}
