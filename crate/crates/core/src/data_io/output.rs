//! Score, fragment and metric files.
//!
//! Every file carries an [`OutputMeta`] (config hash and seed). Writes go to
//! a temporary sibling first and are renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::selector::Fragment;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl OutputMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
        }
    }

    fn comment_line(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

/// Writes `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    tmp.set_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Scores CSV: a `#` metadata line, a `trial_id,t,p` header, then one row per
/// timestep with 1-based `t`.
pub fn save_scores<S: AsRef<str>>(path: &Path, scores: &[(S, &[f64])], meta: &OutputMeta) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("trial_id,t,p\n");
    for (id, p) in scores {
        let id = id.as_ref();
        if id.contains(',') || id.contains('"') || id.contains('\n') {
            return Err(Error::InvalidInput(format!("trial id `{id}` cannot be written to CSV")));
        }
        for (t, v) in p.iter().enumerate() {
            out.push_str(&format!("{id},{},{v:.16e}\n", t + 1));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a scores CSV back into per-trial vectors in file order.
pub fn load_scores(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Load {
            trial: None,
            msg: format!("{}: {e}", path.display()),
        })?;
        let bad = |what: &str| Error::Load {
            trial: None,
            msg: format!("{}: record {}: bad {what}", path.display(), i + 1),
        };
        if rec.len() != 3 {
            return Err(bad("field count"));
        }
        let id = rec[0].to_string();
        let t: usize = rec[1].parse().map_err(|_| bad("t"))?;
        let p: f64 = rec[2].parse().map_err(|_| bad("p"))?;
        match out.last_mut() {
            Some((last, values)) if *last == id => {
                if t != values.len() + 1 {
                    return Err(bad("t sequence"));
                }
                values.push(p);
            }
            _ => {
                if t != 1 {
                    return Err(bad("t sequence"));
                }
                out.push((id, vec![p]));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FragmentFile {
    config_hash: String,
    seed: u64,
    fragments: Vec<Fragment>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FragmentInput {
    Wrapped(FragmentFile),
    Bare(Vec<Fragment>),
}

/// Fragments JSON: `{config_hash, seed, fragments: [{trial_id, center, left, right, score}]}`.
pub fn save_fragments(path: &Path, fragments: &[Fragment], meta: &OutputMeta) -> Result<()> {
    let file = FragmentFile {
        config_hash: meta.config_hash.clone(),
        seed: meta.seed,
        fragments: fragments.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Accepts the wrapped form written by [`save_fragments`] or a bare list.
pub fn load_fragments(path: &Path) -> Result<Vec<Fragment>> {
    let text = read_to_string(path)?;
    let parsed: FragmentInput = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    Ok(match parsed {
        FragmentInput::Wrapped(f) => f.fragments,
        FragmentInput::Bare(v) => v,
    })
}

/// Metrics JSON: a flat map of metric name to value plus the metadata keys.
pub fn save_metrics(path: &Path, metrics: &BTreeMap<String, Value>, meta: &OutputMeta) -> Result<()> {
    let mut map = metrics.clone();
    map.insert("config_hash".into(), Value::from(meta.config_hash.clone()));
    map.insert("seed".into(), Value::from(meta.seed));
    let mut text = serde_json::to_string_pretty(&map).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_metrics(path: &Path) -> Result<BTreeMap<String, Value>> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}
