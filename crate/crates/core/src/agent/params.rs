use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Parameters, Rng};

/// Which blocks feed the scoring head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    /// Segment GCN followed by a BiGRU; the head sees both outputs.
    #[default]
    Full,
    /// `m1`: head directly on the input features.
    HeadOnly,
    /// `m2`: segment GCN then head.
    GcnHead,
    /// `m3`: BiGRU on the input features then head.
    BiGruHead,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::HeadOnly, Variant::GcnHead, Variant::BiGruHead, Variant::Full];

    pub fn code(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::HeadOnly => "m1",
            Variant::GcnHead => "m2",
            Variant::BiGruHead => "m3",
        }
    }

    pub fn has_gcn(&self) -> bool {
        matches!(self, Variant::Full | Variant::GcnHead)
    }

    pub fn has_gru(&self) -> bool {
        matches!(self, Variant::Full | Variant::BiGruHead)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "full" => Variant::Full,
            "m1" => Variant::HeadOnly,
            "m2" => Variant::GcnHead,
            "m3" => Variant::BiGruHead,
            other => return Err(Error::Config(format!("unknown agent variant `{other}`"))),
        })
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.code().to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: Variant,
    /// GCN output width.
    pub gcn_dim: usize,
    /// Hidden width of each GRU direction.
    pub gru_hidden: usize,
    /// Samples per GCN segment.
    pub segment_len: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            gcn_dim: 32,
            gru_hidden: 256,
            segment_len: 16,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gcn_dim == 0 || self.gru_hidden == 0 || self.segment_len == 0 {
            return Err(Error::Config(
                "agent gcn_dim, gru_hidden and segment_len must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Width of the BiGRU input for a given feature dimension.
    pub fn gru_input_dim(&self, input_dim: usize) -> usize {
        if self.variant.has_gcn() {
            self.gcn_dim
        } else {
            input_dim
        }
    }

    /// Width of the vector the head scores.
    pub fn head_dim(&self, input_dim: usize) -> usize {
        match self.variant {
            Variant::HeadOnly => input_dim,
            Variant::GcnHead => self.gcn_dim,
            Variant::BiGruHead => 2 * self.gru_hidden,
            Variant::Full => self.gcn_dim + 2 * self.gru_hidden,
        }
    }
}

/// One GRU direction. Input weights are `in × H`, recurrent weights `H × H`,
/// biases `1 × H`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_n: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_n: Matrix,
    pub b_z: Matrix,
    pub b_r: Matrix,
    pub b_n: Matrix,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Matrix::zeros(input, hidden),
            w_r: Matrix::zeros(input, hidden),
            w_n: Matrix::zeros(input, hidden),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_n: Matrix::zeros(hidden, hidden),
            b_z: Matrix::zeros(1, hidden),
            b_r: Matrix::zeros(1, hidden),
            b_n: Matrix::zeros(1, hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden(&self) -> usize {
        self.u_z.rows()
    }

    fn tensors(&self) -> [&Matrix; 9] {
        [
            &self.w_z, &self.w_r, &self.w_n, &self.u_z, &self.u_r, &self.u_n, &self.b_z, &self.b_r, &self.b_n,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_n,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_n,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_n,
        ]
    }
}

const GRU_FWD_NAMES: [&str; 9] = [
    "gru_fwd.w_z",
    "gru_fwd.w_r",
    "gru_fwd.w_n",
    "gru_fwd.u_z",
    "gru_fwd.u_r",
    "gru_fwd.u_n",
    "gru_fwd.b_z",
    "gru_fwd.b_r",
    "gru_fwd.b_n",
];
const GRU_BWD_NAMES: [&str; 9] = [
    "gru_bwd.w_z",
    "gru_bwd.w_r",
    "gru_bwd.w_n",
    "gru_bwd.u_z",
    "gru_bwd.u_r",
    "gru_bwd.u_n",
    "gru_bwd.b_z",
    "gru_bwd.b_r",
    "gru_bwd.b_n",
];

/// All trainable weights. Also used as the gradient container.
///
/// Flat order (checkpoints, optimizer state): `gcn.weight`, `gcn.bias`,
/// the nine forward-GRU tensors, the nine backward-GRU tensors,
/// `head.weight`, `head.bias`; absent blocks are skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    pub config: AgentConfig,
    pub input_dim: usize,
    pub gcn_weight: Option<Matrix>,
    pub gcn_bias: Option<Matrix>,
    pub gru_forward: Option<GruParams>,
    pub gru_backward: Option<GruParams>,
    pub head_weight: Matrix,
    pub head_bias: Matrix,
}

impl AgentParams {
    /// All-zero parameters with the right shapes.
    pub fn zeros(config: AgentConfig, input_dim: usize) -> Self {
        let (gcn_weight, gcn_bias) = if config.variant.has_gcn() {
            (
                Some(Matrix::zeros(input_dim, config.gcn_dim)),
                Some(Matrix::zeros(1, config.gcn_dim)),
            )
        } else {
            (None, None)
        };
        let gru_in = config.gru_input_dim(input_dim);
        let (gru_forward, gru_backward) = if config.variant.has_gru() {
            (
                Some(GruParams::zeros(gru_in, config.gru_hidden)),
                Some(GruParams::zeros(gru_in, config.gru_hidden)),
            )
        } else {
            (None, None)
        };
        Self {
            config,
            input_dim,
            gcn_weight,
            gcn_bias,
            gru_forward,
            gru_backward,
            head_weight: Matrix::zeros(1, config.head_dim(input_dim)),
            head_bias: Matrix::zeros(1, 1),
        }
    }

    /// Weights uniform in `(−scale, scale)`, biases zero.
    pub fn init_uniform(config: AgentConfig, input_dim: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let mut p = Self::zeros(config, input_dim);
        for (name, t) in p.tensors_mut() {
            if name.contains(".w") || name.contains(".u") || name == "gcn.weight" || name == "head.weight" {
                t.iter_mut().for_each(|v| *v = rng.uniform_range(-scale, scale));
            }
        }
        Ok(p)
    }

    /// Default initialization: weights uniform in `(−0.05, 0.05)`.
    pub fn init(config: AgentConfig, input_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::init_uniform(config, input_dim, 0.05, rng)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config, self.input_dim)
    }

    /// `(name, rows, cols)` for every tensor in flat order.
    pub fn shapes(&self) -> Vec<(&'static str, usize, usize)> {
        self.matrices().into_iter().map(|(n, m)| (n, m.rows(), m.cols())).collect()
    }

    pub fn matrices(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = Vec::new();
        if let (Some(w), Some(b)) = (&self.gcn_weight, &self.gcn_bias) {
            out.push(("gcn.weight", w));
            out.push(("gcn.bias", b));
        }
        if let Some(g) = &self.gru_forward {
            out.extend(GRU_FWD_NAMES.iter().copied().zip(g.tensors()));
        }
        if let Some(g) = &self.gru_backward {
            out.extend(GRU_BWD_NAMES.iter().copied().zip(g.tensors()));
        }
        out.push(("head.weight", &self.head_weight));
        out.push(("head.bias", &self.head_bias));
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = Vec::new();
        if let (Some(w), Some(b)) = (self.gcn_weight.as_mut(), self.gcn_bias.as_mut()) {
            out.push(("gcn.weight", w));
            out.push(("gcn.bias", b));
        }
        if let Some(g) = self.gru_forward.as_mut() {
            out.extend(GRU_FWD_NAMES.iter().copied().zip(g.tensors_mut()));
        }
        if let Some(g) = self.gru_backward.as_mut() {
            out.extend(GRU_BWD_NAMES.iter().copied().zip(g.tensors_mut()));
        }
        out.push(("head.weight", &mut self.head_weight));
        out.push(("head.bias", &mut self.head_bias));
        out
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &AgentParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for AgentParams {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        self.matrices().into_iter().map(|(n, m)| (n, m.as_slice())).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.matrices_mut()
            .into_iter()
            .map(|(n, m)| (n, m.as_mut_slice()))
            .collect()
    }
}
