//! Checkpoint format: one JSON header line, then one parameter value per
//! line (`{:.16e}`) in the flat order of [`AgentParams`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{AgentConfig, AgentParams};
use crate::data_io::output::read_to_string;
use crate::data_io::{write_atomic, OutputMeta};
use crate::error::{Error, Result};
use crate::numerics::Parameters;

const FORMAT: &str = "tasnet-checkpoint-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    input_dim: usize,
    config: AgentConfig,
    tensors: Vec<TensorShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn save_checkpoint(path: &Path, params: &AgentParams, meta: Option<&OutputMeta>) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        input_dim: params.input_dim,
        config: params.config,
        tensors: params
            .shapes()
            .into_iter()
            .map(|(name, rows, cols)| TensorShape {
                name: name.into(),
                rows,
                cols,
            })
            .collect(),
        config_hash: meta.map(|m| m.config_hash.clone()),
        seed: meta.map(|m| m.seed),
    };
    let mut text = serde_json::to_string(&header).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    for (_, values) in params.tensors() {
        for v in values {
            writeln!(text, "{v:.16e}").expect("writing to a String cannot fail");
        }
    }
    write_atomic(path, text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<AgentParams> {
    let text = read_to_string(path)?;
    let bad = |msg: String| Error::Load { trial: None, msg: format!("{}: {msg}", path.display()) };
    let mut lines = text.lines();
    let header: Header = serde_json::from_str(lines.next().ok_or_else(|| bad("empty checkpoint".into()))?)
        .map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
    if header.format != FORMAT {
        return Err(bad(format!("unsupported format `{}`", header.format)));
    }
    header.config.validate()?;
    let mut params = AgentParams::zeros(header.config, header.input_dim);
    let expected = params.shapes();
    let declared: Vec<(&str, usize, usize)> = header
        .tensors
        .iter()
        .map(|t| (t.name.as_str(), t.rows, t.cols))
        .collect();
    if expected != declared {
        return Err(bad("tensor shapes in header do not match the configuration".into()));
    }
    let mut values = Vec::with_capacity(params.parameter_count());
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| bad(format!("value line {} is not a number: `{line}`", i + 2)))?;
        if !v.is_finite() {
            return Err(bad(format!("value line {} is not finite", i + 2)));
        }
        values.push(v);
    }
    if values.len() != params.parameter_count() {
        return Err(bad(format!(
            "expected {} values, found {}",
            params.parameter_count(),
            values.len()
        )));
    }
    let mut it = values.into_iter();
    for (_, t) in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v = it.next().expect("count checked above"));
    }
    Ok(params)
}
