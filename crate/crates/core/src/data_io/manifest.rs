//! `manifest.json` plus one headerless CSV of features per trial.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_io::output::{read_to_string, write_atomic, OutputMeta};
use crate::data_io::{Interval, Trial, TrialSet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_count: Option<usize>,
    pub trials: Vec<ManifestTrial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTrial {
    pub id: String,
    /// Relative to the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_intervals: Option<Vec<Interval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// Declared row count, checked on load when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
}

pub fn load_trialset(manifest_path: &Path) -> Result<TrialSet> {
    let text = read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: manifest_path.into(),
        source: e,
    })?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let path = base.join(&entry.path);
        let features = read_feature_csv(&path, manifest.feature_dim).map_err(|e| match e {
            Error::Load { trial: None, msg } => Error::Load {
                trial: Some(entry.id.clone()),
                msg,
            },
            Error::Io { path, source } => Error::Load {
                trial: Some(entry.id.clone()),
                msg: format!("cannot read {}: {source}", path.display()),
            },
            other => other,
        })?;
        if let Some(len) = entry.length {
            if len != features.rows() {
                return Err(Error::Load {
                    trial: Some(entry.id.clone()),
                    msg: format!("manifest declares {len} rows, file has {}", features.rows()),
                });
            }
        }
        let mut trial = Trial {
            id: entry.id.clone(),
            features,
            label: entry.label,
            truth_intervals: entry.truth_intervals.clone(),
            subject: entry.subject.clone(),
        };
        if let Some(ivs) = trial.truth_intervals.as_mut() {
            ivs.sort();
        }
        trial.validate()?;
        trials.push(trial);
    }
    TrialSet::new(trials, manifest.feature_dim, manifest.class_count)
}

/// Parses a headerless numeric CSV with exactly `dim` columns per row.
pub fn read_feature_csv(path: &Path, dim: usize) -> Result<Matrix> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Load {
            trial: None,
            msg: format!("{}: {e}", path.display()),
        })?;
        if rec.len() != dim {
            return Err(Error::Load {
                trial: None,
                msg: format!(
                    "{}: row {} has {} columns, expected {dim}",
                    path.display(),
                    r + 1,
                    rec.len()
                ),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Load {
                trial: None,
                msg: format!(
                    "{}: row {}, col {}: `{cell}` is not a finite number",
                    path.display(),
                    r + 1,
                    c + 1
                ),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Matrix::new(rows, dim, data)
}

/// 17 significant digits, which round-trips every `f64`.
pub fn feature_csv_string(features: &Matrix) -> String {
    let mut out = String::with_capacity(features.rows() * features.cols() * 24);
    for r in 0..features.rows() {
        for (c, v) in features.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `manifest.json` and one CSV per trial into `dir`; returns the
/// manifest path.
pub fn save_trialset(dir: &Path, set: &TrialSet, meta: Option<&OutputMeta>) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(set.trials.len());
    let mut used = std::collections::BTreeSet::new();
    for (i, trial) in set.trials.iter().enumerate() {
        let mut stem = file_stem_for(&trial.id);
        if !used.insert(stem.clone()) {
            stem = format!("{stem}_{i}");
            used.insert(stem.clone());
        }
        let rel = format!("{stem}.csv");
        write_atomic(&dir.join(&rel), feature_csv_string(&trial.features).as_bytes())?;
        entries.push(ManifestTrial {
            id: trial.id.clone(),
            path: rel,
            label: trial.label,
            truth_intervals: trial.truth_intervals.clone(),
            subject: trial.subject.clone(),
            length: Some(trial.len()),
        });
    }
    let manifest = Manifest {
        feature_dim: set.feature_dim,
        class_count: set.class_count,
        trials: entries,
        config_hash: meta.map(|m| m.config_hash.clone()),
        seed: meta.map(|m| m.seed),
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
