//! Trials, datasets on disk, the synthetic planted-fragment generator and
//! output files.

pub mod features;
pub mod manifest;
pub mod output;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use features::extract_stat_features;
pub use manifest::{load_trialset, save_trialset};
pub use output::{
    load_fragments, load_metrics, load_scores, save_fragments, save_metrics, save_scores,
    write_atomic, OutputMeta,
};
pub use synth::{synth_generate, SynthConfig};

/// Half-open `[start, end)` range of 0-based sample indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }
}

impl From<(usize, usize)> for Interval {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

impl From<Interval> for (usize, usize) {
    fn from(i: Interval) -> Self {
        (i.start, i.end)
    }
}

/// One feature sequence: `T` rows (one per 1 s sample) × `D` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub id: String,
    pub features: Matrix,
    pub label: Option<usize>,
    pub truth_intervals: Option<Vec<Interval>>,
    pub subject: Option<String>,
}

impl Trial {
    pub fn new(
        id: impl Into<String>,
        features: Matrix,
        label: Option<usize>,
        truth_intervals: Option<Vec<Interval>>,
    ) -> Result<Self> {
        let trial = Self {
            id: id.into(),
            features,
            label,
            truth_intervals,
            subject: None,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let load_err = |msg: String| Error::Load {
            trial: Some(self.id.clone()),
            msg,
        };
        if self.features.rows() == 0 || self.features.cols() == 0 {
            return Err(load_err(format!(
                "feature matrix must be at least 1x1, got {:?}",
                self.features.shape()
            )));
        }
        if let Some(intervals) = &self.truth_intervals {
            let t = self.len();
            let mut sorted = intervals.clone();
            sorted.sort();
            for iv in &sorted {
                if iv.start >= iv.end || iv.end > t {
                    return Err(load_err(format!(
                        "malformed interval [{}, {}) for a trial of length {t}",
                        iv.start, iv.end
                    )));
                }
            }
            for w in sorted.windows(2) {
                if w[1].start < w[0].end {
                    return Err(load_err(format!(
                        "overlapping intervals [{}, {}) and [{}, {})",
                        w[0].start, w[0].end, w[1].start, w[1].end
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub feature_dim: usize,
    pub class_count: Option<usize>,
}

impl TrialSet {
    pub fn new(trials: Vec<Trial>, feature_dim: usize, class_count: Option<usize>) -> Result<Self> {
        let set = Self {
            trials,
            feature_dim,
            class_count,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for trial in &self.trials {
            trial.validate()?;
            if !seen.insert(trial.id.as_str()) {
                return Err(Error::Load {
                    trial: Some(trial.id.clone()),
                    msg: "duplicate trial id".into(),
                });
            }
            if trial.dim() != self.feature_dim {
                return Err(Error::Load {
                    trial: Some(trial.id.clone()),
                    msg: format!(
                        "feature dimension {} differs from dataset dimension {}",
                        trial.dim(),
                        self.feature_dim
                    ),
                });
            }
            if let (Some(label), Some(c)) = (trial.label, self.class_count) {
                if label >= c {
                    return Err(Error::Load {
                        trial: Some(trial.id.clone()),
                        msg: format!("label {label} outside [0, {c})"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Labels of every trial, or `None` if any trial is unlabeled.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.trials.iter().map(|t| t.label).collect()
    }

    /// Distinct subject tags in first-appearance order.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.trials {
            if let Some(s) = &t.subject {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
        out
    }

    /// Trials matching `keep`, preserving order.
    pub fn filter(&self, keep: impl Fn(&Trial) -> bool) -> TrialSet {
        TrialSet {
            trials: self.trials.iter().filter(|t| keep(t)).cloned().collect(),
            feature_dim: self.feature_dim,
            class_count: self.class_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_validation() {
        let f = Matrix::zeros(10, 2);
        assert!(Trial::new("a", f.clone(), None, Some(vec![Interval::new(2, 5)])).is_ok());
        assert!(Trial::new("a", f.clone(), None, Some(vec![Interval::new(5, 5)])).is_err());
        assert!(Trial::new("a", f.clone(), None, Some(vec![Interval::new(8, 11)])).is_err());
        let overlap = vec![Interval::new(0, 4), Interval::new(3, 6)];
        let err = Trial::new("ov", f.clone(), None, Some(overlap)).unwrap_err();
        assert!(err.to_string().contains("ov"));
        assert!(Trial::new("e", Matrix::zeros(0, 2), None, None).is_err());
    }

    #[test]
    fn trialset_rejects_mixed_dims_and_bad_labels() {
        let a = Trial::new("a", Matrix::zeros(3, 2), Some(0), None).unwrap();
        let b = Trial::new("b", Matrix::zeros(3, 3), Some(1), None).unwrap();
        assert!(TrialSet::new(vec![a.clone(), b], 2, Some(2)).is_err());
        let c = Trial::new("c", Matrix::zeros(3, 2), Some(2), None).unwrap();
        assert!(TrialSet::new(vec![a.clone(), c], 2, Some(2)).is_err());
        assert!(TrialSet::new(vec![a.clone(), a], 2, Some(2)).is_err());
    }
}
