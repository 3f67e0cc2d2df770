//! Rewards over a selected key-moment set.
//!
//! Indices in `selected` are 0-based rows of the feature matrix. Empty
//! selections score 0 on every term, and fewer than two selections give
//! zero for the pairwise terms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, euclidean, norm, Matrix};

/// `exp(−(1/T) Σ_t min_{t'∈selected} ‖s_t − s_{t'}‖₂)`.
pub fn reward_rep(features: &Matrix, selected: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let t = features.rows();
    let mut total = 0.0;
    for i in 0..t {
        let row = features.row(i);
        let mut best = f64::INFINITY;
        for &j in selected {
            if i == j {
                best = 0.0;
                break;
            }
            best = best.min(euclidean(row, features.row(j)));
        }
        total += best;
    }
    (-total / t as f64).exp()
}

fn cosine(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Mean of `f(cos)` over ordered pairs of distinct selected indices.
fn mean_pairwise(features: &Matrix, selected: &[usize], f: impl Fn(f64) -> f64) -> f64 {
    let n = selected.len();
    if n < 2 {
        return 0.0;
    }
    let norms: Vec<f64> = selected.iter().map(|&i| norm(features.row(i))).collect();
    let mut sum = 0.0;
    for a in 0..n {
        let ra = features.row(selected[a]);
        for b in a + 1..n {
            sum += f(cosine(ra, norms[a], features.row(selected[b]), norms[b]));
        }
    }
    // Each unordered pair stands for two ordered ones.
    2.0 * sum / (n * (n - 1)) as f64
}

/// Mean pairwise cosine similarity.
pub fn reward_sim(features: &Matrix, selected: &[usize]) -> f64 {
    mean_pairwise(features, selected, |c| c)
}

/// Mean pairwise cosine dissimilarity `1 − cos`.
pub fn reward_div(features: &Matrix, selected: &[usize]) -> f64 {
    mean_pairwise(features, selected, |c| 1.0 - c)
}

/// Reward combinations used in ablations, `r1`…`r5`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RewardCombo {
    /// `r1`
    Rep,
    /// `r2`
    Sim,
    /// `r3`
    Div,
    /// `r4`
    RepDiv,
    /// `r5`, the default.
    #[default]
    RepSim,
}

impl RewardCombo {
    pub const ALL: [RewardCombo; 5] = [
        RewardCombo::Rep,
        RewardCombo::Sim,
        RewardCombo::Div,
        RewardCombo::RepDiv,
        RewardCombo::RepSim,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            RewardCombo::Rep => "r1",
            RewardCombo::Sim => "r2",
            RewardCombo::Div => "r3",
            RewardCombo::RepDiv => "r4",
            RewardCombo::RepSim => "r5",
        }
    }

    fn uses_rep(&self) -> bool {
        matches!(self, RewardCombo::Rep | RewardCombo::RepDiv | RewardCombo::RepSim)
    }

    fn uses_sim(&self) -> bool {
        matches!(self, RewardCombo::Sim | RewardCombo::RepSim)
    }

    fn uses_div(&self) -> bool {
        matches!(self, RewardCombo::Div | RewardCombo::RepDiv)
    }
}

impl fmt::Display for RewardCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RewardCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "r1" | "rep" => RewardCombo::Rep,
            "r2" | "sim" => RewardCombo::Sim,
            "r3" | "div" => RewardCombo::Div,
            "r4" | "rep+div" => RewardCombo::RepDiv,
            "r5" | "rep+sim" => RewardCombo::RepSim,
            other => return Err(Error::Config(format!("unknown reward combination `{other}`"))),
        })
    }
}

impl TryFrom<String> for RewardCombo {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RewardCombo> for String {
    fn from(c: RewardCombo) -> String {
        c.code().to_string()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_rep: f64,
    pub r_sim: f64,
    pub r_div: Option<f64>,
    pub total: f64,
}

/// All components the combo needs plus `r_rep`/`r_sim` for logging.
pub fn total_reward(combo: RewardCombo, features: &Matrix, selected: &[usize]) -> RewardBreakdown {
    let r_rep = reward_rep(features, selected);
    let r_sim = reward_sim(features, selected);
    let r_div = combo.uses_div().then(|| reward_div(features, selected));
    let mut total = 0.0;
    if combo.uses_rep() {
        total += r_rep;
    }
    if combo.uses_sim() {
        total += r_sim;
    }
    if let Some(d) = r_div {
        total += d;
    }
    RewardBreakdown {
        r_rep,
        r_sim,
        r_div,
        total,
    }
}

/// Anything that scores an episode's selection.
pub trait EpisodeReward {
    fn evaluate(&self, features: &Matrix, selected: &[usize]) -> RewardBreakdown;
}

impl EpisodeReward for RewardCombo {
    fn evaluate(&self, features: &Matrix, selected: &[usize]) -> RewardBreakdown {
        total_reward(*self, features, selected)
    }
}

/// Wraps a plain scoring closure; only `total` is populated.
pub struct FnReward<F>(pub F);

impl<F: Fn(&Matrix, &[usize]) -> f64> EpisodeReward for FnReward<F> {
    fn evaluate(&self, features: &Matrix, selected: &[usize]) -> RewardBreakdown {
        RewardBreakdown {
            total: (self.0)(features, selected),
            ..Default::default()
        }
    }
}
