//! Time-aware scoring agent.
//!
//! A trial of `T` samples is cut into segments of `segment_len`; a one-layer
//! GCN over a chain graph inside each segment gives local features, a BiGRU
//! over the whole sequence gives global ones, and a linear head on their
//! concatenation produces `p_t = σ(w·h_t + b)`. The logit is clamped to
//! `[−30, 30]` before the sigmoid.

mod checkpoint;
mod gcn;
mod gru;
mod params;
mod segment;

use std::ops::Range;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gcn::{gcn_backward, gcn_forward, GcnCache};
pub use gru::{gru_backward, gru_forward, GruCache};
pub use params::{AgentConfig, AgentParams, GruParams, Variant};
pub use segment::{chain_adjacency, propagate, segment};

use crate::data_io::Trial;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng};

pub const LOGIT_CLAMP: f64 = 30.0;

/// Per-timestep selection probabilities, each strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceScores(Vec<f64>);

impl ImportanceScores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((t, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidInput(format!("score {v} at timestep {t} is outside (0, 1)")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Binary actions `a_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionVector(pub Vec<bool>);

impl ActionVector {
    /// 0-based timesteps with `a_t = 1`.
    pub fn selected(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, a)| **a).map(|(t, _)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Everything the backward pass needs from one forward call.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub variant: Variant,
    pub input_dim: usize,
    pub segments: Vec<Range<usize>>,
    pub gcn: Option<GcnCache>,
    pub gru_forward: Option<GruCache>,
    pub gru_backward: Option<GruCache>,
    /// Rows are the vectors the head scores.
    pub head_input: Matrix,
    /// Unclamped logits.
    pub logits: Vec<f64>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    /// 1 where the logit is inside the clamp range, else 0.
    pub fn clamp_mask(&self) -> Vec<f64> {
        self.logits
            .iter()
            .map(|z| if z.abs() < LOGIT_CLAMP { 1.0 } else { 0.0 })
            .collect()
    }
}

fn hcat(parts: &[&Matrix]) -> Matrix {
    let rows = parts[0].rows();
    let cols = parts.iter().map(|m| m.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    for t in 0..rows {
        let mut offset = 0;
        let row = out.row_mut(t);
        for m in parts {
            row[offset..offset + m.cols()].copy_from_slice(m.row(t));
            offset += m.cols();
        }
    }
    out
}

fn column_block(m: &Matrix, start: usize, width: usize) -> Matrix {
    Matrix::from_fn(m.rows(), width, |i, j| m[(i, start + j)])
}

/// Forward and backward GRU outputs concatenated per row (`T × 2H`).
pub fn bigru_forward(x: &Matrix, fwd: &GruParams, bwd: &GruParams) -> Result<(Matrix, GruCache, GruCache)> {
    let (hf, cf) = gru_forward(x, fwd, false)?;
    let (hb, cb) = gru_forward(x, bwd, true)?;
    Ok((hcat(&[&hf, &hb]), cf, cb))
}

/// Scores every timestep of a feature matrix.
pub fn forward_features(features: &Matrix, params: &AgentParams) -> Result<(ImportanceScores, ForwardCache)> {
    let cfg = params.config;
    if features.cols() != params.input_dim {
        return Err(Error::dims("agent forward", params.input_dim, features.cols()));
    }
    if features.rows() == 0 {
        return Err(Error::InvalidInput("cannot score an empty sequence".into()));
    }
    let segments = segment(features.rows(), cfg.segment_len);

    let (local, gcn_cache) = match (&params.gcn_weight, &params.gcn_bias) {
        (Some(w), Some(b)) => {
            let (out, cache) = gcn_forward(&segments, features, w, b)?;
            (Some(out), Some(cache))
        }
        _ => (None, None),
    };
    let gru_input = local.as_ref().unwrap_or(features);
    let (global, gru_caches) = match (&params.gru_forward, &params.gru_backward) {
        (Some(f), Some(b)) => {
            let (out, cf, cb) = bigru_forward(gru_input, f, b)?;
            (Some(out), Some((cf, cb)))
        }
        _ => (None, None),
    };
    let head_input = match (cfg.variant, &local, &global) {
        (Variant::HeadOnly, _, _) => features.clone(),
        (Variant::GcnHead, Some(l), _) => l.clone(),
        (Variant::BiGruHead, _, Some(g)) => g.clone(),
        (Variant::Full, Some(l), Some(g)) => hcat(&[l, g]),
        _ => return Err(Error::Config(format!("parameters do not match variant {}", cfg.variant))),
    };
    if head_input.cols() != params.head_weight.cols() {
        return Err(Error::dims("agent head", params.head_weight.cols(), head_input.cols()));
    }

    let w = params.head_weight.row(0);
    let b = params.head_bias[(0, 0)];
    let logits: Vec<f64> = (0..head_input.rows())
        .map(|t| crate::numerics::dot(w, head_input.row(t)) + b)
        .collect();
    let scores = logits
        .iter()
        .map(|z| sigmoid(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)))
        .collect();
    let (gru_forward_cache, gru_backward_cache) = match gru_caches {
        Some((f, b)) => (Some(f), Some(b)),
        None => (None, None),
    };
    Ok((
        ImportanceScores::new(scores)?,
        ForwardCache {
            variant: cfg.variant,
            input_dim: params.input_dim,
            segments,
            gcn: gcn_cache,
            gru_forward: gru_forward_cache,
            gru_backward: gru_backward_cache,
            head_input,
            logits,
        },
    ))
}

pub fn forward(trial: &Trial, params: &AgentParams) -> Result<(ImportanceScores, ForwardCache)> {
    forward_features(&trial.features, params)
}

/// Independent `a_t ~ Bernoulli(p_t)`.
pub fn sample_actions(scores: &ImportanceScores, rng: &mut Rng) -> ActionVector {
    ActionVector(scores.as_slice().iter().map(|&p| rng.bernoulli(p)).collect())
}

fn check_cache(cache: &ForwardCache, params: &AgentParams) -> Result<()> {
    if cache.variant != params.config.variant
        || cache.input_dim != params.input_dim
        || cache.head_input.cols() != params.head_weight.cols()
    {
        return Err(Error::InvalidInput(
            "forward cache does not match the parameters (stale cache)".into(),
        ));
    }
    Ok(())
}

/// Backpropagates a gradient on the (unclamped) logits to every parameter.
/// Entries of `d_logits` at clamped timesteps should already be zero.
pub fn backward(params: &AgentParams, cache: &ForwardCache, d_logits: &[f64]) -> Result<AgentParams> {
    check_cache(cache, params)?;
    if d_logits.len() != cache.len() {
        return Err(Error::dims("agent backward", cache.len(), d_logits.len()));
    }
    let mut grads = params.zeros_like();
    let w = params.head_weight.row(0);
    let mut d_head_in = Matrix::zeros(cache.head_input.rows(), w.len());
    {
        let gw = grads.head_weight.row_mut(0);
        for (t, &d) in d_logits.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            crate::numerics::axpy(d, cache.head_input.row(t), gw);
            crate::numerics::axpy(d, w, d_head_in.row_mut(t));
        }
    }
    grads.head_bias.as_mut_slice()[0] = d_logits.iter().sum();

    let cfg = params.config;
    let gcn_width = if cfg.variant.has_gcn() { cfg.gcn_dim } else { 0 };
    let mut d_local = cfg
        .variant
        .has_gcn()
        .then(|| column_block(&d_head_in, 0, gcn_width));

    if let (Some(pf), Some(pb), Some(cf), Some(cb)) = (
        &params.gru_forward,
        &params.gru_backward,
        &cache.gru_forward,
        &cache.gru_backward,
    ) {
        let h = cfg.gru_hidden;
        let d_hf = column_block(&d_head_in, gcn_width, h);
        let d_hb = column_block(&d_head_in, gcn_width + h, h);
        let (gf, dxf) = gru_backward(cf, pf, &d_hf)?;
        let (gb, dxb) = gru_backward(cb, pb, &d_hb)?;
        grads.gru_forward = Some(gf);
        grads.gru_backward = Some(gb);
        if let Some(dl) = d_local.as_mut() {
            dl.add_assign(&dxf);
            dl.add_assign(&dxb);
        }
    }

    if let (Some(w), Some(gc), Some(dl)) = (&params.gcn_weight, &cache.gcn, &d_local) {
        let (dw, db, _) = gcn_backward(&cache.segments, gc, w, dl)?;
        grads.gcn_weight = Some(dw);
        grads.gcn_bias = Some(db);
    }
    Ok(grads)
}

/// `∇θ Σ_t log π(a_t | h_t)`, using `∂/∂z log π = a_t − p_t`.
pub fn grad_log_policy(
    actions: &ActionVector,
    scores: &ImportanceScores,
    cache: &ForwardCache,
    params: &AgentParams,
) -> Result<AgentParams> {
    if actions.len() != cache.len() || scores.len() != cache.len() {
        return Err(Error::InvalidInput(format!(
            "stale cache: {} actions, {} scores, cache for {} timesteps",
            actions.len(),
            scores.len(),
            cache.len()
        )));
    }
    let mask = cache.clamp_mask();
    let d: Vec<f64> = actions
        .0
        .iter()
        .zip(scores.as_slice())
        .zip(&mask)
        .map(|((&a, &p), &m)| m * (if a { 1.0 } else { 0.0 } - p))
        .collect();
    backward(params, cache, &d)
}

/// `Σ_t log π(a_t | h_t)` from clamped logits.
pub fn log_policy(actions: &ActionVector, scores: &ImportanceScores) -> f64 {
    actions
        .0
        .iter()
        .zip(scores.as_slice())
        .map(|(&a, &p)| if a { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

#[cfg(test)]
mod tests;
