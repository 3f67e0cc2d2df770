//! Trial pooling, spectral clustering (hypergraph and simple-graph
//! Laplacians) with a PCA + k-means baseline, and scoring.

pub mod hypergraph;
pub mod kmeans;
pub mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_io::Trial;
use crate::error::{Error, Result};
use crate::numerics::{sym_eigen, sym_eigs_smallest, EigenMethod, Matrix, Rng};
use crate::selector::{sampled_indices, Fragment};

pub use hypergraph::{
    build_hypergraph, hypergraph_laplacian, knn_graph_weights, normalized_laplacian, Hypergraph,
};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use metrics::{align_and_score, nmi, recall_at, tiou, Scores};

/// Upper bound on vertices when clustering individual samples; longer
/// inputs are subsampled with a per-trial stride.
pub const MAX_SAMPLE_VERTICES: usize = 1500;

/// Mean of the given feature rows, or of all rows when `idx` is empty.
pub fn pool_indices(features: &Matrix, idx: &[usize]) -> Result<Vec<f64>> {
    if features.rows() == 0 {
        return Err(Error::InvalidInput("cannot pool an empty sequence".into()));
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= features.rows()) {
        return Err(Error::InvalidInput(format!(
            "sample index {i} outside a {}-row sequence",
            features.rows()
        )));
    }
    let rows: Vec<usize> = if idx.is_empty() {
        (0..features.rows()).collect()
    } else {
        idx.to_vec()
    };
    let mut mean = vec![0.0; features.cols()];
    for &r in &rows {
        for (m, x) in mean.iter_mut().zip(features.row(r)) {
            *m += x;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Trial representation over the union of `fragments` (whole trial if none).
pub fn pool_trial(trial: &Trial, fragments: &[Fragment]) -> Result<Vec<f64>> {
    pool_indices(&trial.features, &sampled_indices(fragments))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClusterMethod {
    #[default]
    Hypergraph,
    SimpleGraph,
    PcaKmeans,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 3] = [
        ClusterMethod::SimpleGraph,
        ClusterMethod::PcaKmeans,
        ClusterMethod::Hypergraph,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            ClusterMethod::Hypergraph => "hypergraph",
            ClusterMethod::SimpleGraph => "simple_graph",
            ClusterMethod::PcaKmeans => "pca_kmeans",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypergraph" => Ok(ClusterMethod::Hypergraph),
            "simple_graph" => Ok(ClusterMethod::SimpleGraph),
            "pca_kmeans" => Ok(ClusterMethod::PcaKmeans),
            other => Err(Error::Config(format!(
                "unknown clustering method `{other}` (expected hypergraph, simple_graph or pca_kmeans)"
            ))),
        }
    }
}

impl TryFrom<String> for ClusterMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClusterMethod> for String {
    fn from(m: ClusterMethod) -> String {
        m.code().to_string()
    }
}

/// Whether trials are clustered as pooled vectors or sample by sample with
/// a per-trial majority vote.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Granularity {
    #[default]
    Trial,
    Sample,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trial" => Ok(Granularity::Trial),
            "sample" => Ok(Granularity::Sample),
            other => Err(Error::Config(format!("unknown granularity `{other}` (expected trial or sample)"))),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Trial => "trial",
            Granularity::Sample => "sample",
        })
    }
}

impl TryFrom<String> for Granularity {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Granularity> for String {
    fn from(g: Granularity) -> String {
        g.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterConfig {
    pub method: ClusterMethod,
    pub k_nn: usize,
    pub kmeans: KMeansConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Hypergraph,
            k_nn: 5,
            kmeans: KMeansConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    /// One row per vertex, `c` columns.
    pub embedding: Matrix,
    pub scores: Option<Scores>,
}

impl ClusterResult {
    pub fn score(&mut self, labels: &[usize], class_count: usize) -> Result<Scores> {
        let s = align_and_score(&self.assignments, labels, class_count)?;
        self.scores = Some(s);
        Ok(s)
    }
}

fn row_normalize(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Projection onto the top `c` principal components. When `D < c` the
/// missing columns are zero.
pub fn pca_project(vectors: &Matrix, c: usize) -> Result<Matrix> {
    let (n, d) = vectors.shape();
    let mean = vectors.column_means();
    let centered = Matrix::from_fn(n, d, |r, col| vectors[(r, col)] - mean[col]);
    let mut cov = centered.t_matmul(&centered)?;
    cov.scale(1.0 / n as f64);
    // Round-off can leave the product a hair away from symmetric.
    let cov = Matrix::from_fn(d, d, |i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
    let eig = sym_eigen(&cov, EigenMethod::Auto)?;
    let keep = c.min(d);
    // Ascending order: the leading components are at the end.
    let basis = Matrix::from_fn(d, c, |r, k| if k < keep { eig.vectors[(r, d - 1 - k)] } else { 0.0 });
    centered.matmul(&basis)
}

fn spectral_embedding(laplacian: &Matrix, c: usize) -> Result<Matrix> {
    let mut emb = sym_eigs_smallest(laplacian, c)?.vectors;
    row_normalize(&mut emb);
    Ok(emb)
}

/// Clusters the rows of `vectors` into `c` groups.
pub fn spectral_cluster(vectors: &Matrix, c: usize, cfg: &ClusterConfig, seed: u64) -> Result<ClusterResult> {
    let n = vectors.rows();
    if c < 2 {
        return Err(Error::Config(format!("clustering needs at least 2 clusters, got {c}")));
    }
    if c >= n {
        return Err(Error::Config(format!(
            "cannot form {c} clusters from {n} vertices (need more vertices than clusters)"
        )));
    }
    if !vectors.is_finite() {
        return Err(Error::InvalidInput("non-finite vertex representation".into()));
    }
    if cfg.k_nn == 0 {
        return Err(Error::Config("cluster.k_nn must be >= 1".into()));
    }
    let k_nn = cfg.k_nn.min(n - 1);
    let embedding = match cfg.method {
        ClusterMethod::Hypergraph => {
            let h = build_hypergraph(vectors, k_nn)?;
            spectral_embedding(&hypergraph_laplacian(&h)?, c)?
        }
        ClusterMethod::SimpleGraph => {
            let w = knn_graph_weights(vectors, k_nn)?;
            spectral_embedding(&normalized_laplacian(&w)?, c)?
        }
        ClusterMethod::PcaKmeans => pca_project(vectors, c)?,
    };
    let km = kmeans(&embedding, c, &cfg.kmeans, &Rng::new(seed))?;
    Ok(ClusterResult {
        assignments: km.assignments,
        embedding,
        scores: None,
    })
}

/// Clusters individual samples of every trial jointly, then labels each
/// trial by the majority cluster of its samples (ties to the lower id).
/// `sample_sets[i]` lists the rows of `trials[i]` to use; an empty list means
/// the whole trial.
pub fn cluster_by_samples(
    trials: &[&Trial],
    sample_sets: &[Vec<usize>],
    c: usize,
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    if trials.len() != sample_sets.len() {
        return Err(Error::dims("cluster_by_samples", trials.len(), sample_sets.len()));
    }
    let sets: Vec<Vec<usize>> = trials
        .iter()
        .zip(sample_sets)
        .map(|(t, s)| if s.is_empty() { (0..t.len()).collect() } else { s.clone() })
        .collect();
    let total: usize = sets.iter().map(Vec::len).sum();
    let stride = total.div_ceil(MAX_SAMPLE_VERTICES).max(1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut owner = Vec::new();
    for (i, (t, set)) in trials.iter().zip(&sets).enumerate() {
        for &r in set.iter().step_by(stride) {
            if r >= t.len() {
                return Err(Error::InvalidInput(format!("sample {r} outside trial `{}`", t.id)));
            }
            rows.push(t.features.row(r).to_vec());
            owner.push(i);
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no samples to cluster".into()));
    }
    let vectors = Matrix::from_rows(&rows)?;
    let result = spectral_cluster(&vectors, c, cfg, seed)?;
    let mut votes = vec![vec![0usize; c]; trials.len()];
    for (&o, &a) in owner.iter().zip(&result.assignments) {
        votes[o][a] += 1;
    }
    Ok(votes
        .iter()
        .map(|v| {
            let best = *v.iter().max().unwrap_or(&0);
            v.iter().position(|&x| x == best).unwrap_or(0)
        })
        .collect())
}
