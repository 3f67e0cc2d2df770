//! k-NN star hypergraphs, the simple Gaussian k-NN graph, and their
//! normalized Laplacians.

use crate::error::{Error, Result};
use crate::numerics::{euclidean, Matrix};

pub const SIGMA_FLOOR: f64 = 1e-12;

/// Weighted hypergraph with explicit member lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    pub vertex_count: usize,
    /// Sorted vertex indices of each hyperedge.
    pub edges: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl Hypergraph {
    pub fn new(vertex_count: usize, edges: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        let h = Self {
            vertex_count,
            edges: edges
                .into_iter()
                .map(|mut e| {
                    e.sort_unstable();
                    e.dedup();
                    e
                })
                .collect(),
            weights,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.weights.len() {
            return Err(Error::dims("hypergraph", self.edges.len(), self.weights.len()));
        }
        for (i, (e, &w)) in self.edges.iter().zip(&self.weights).enumerate() {
            if e.len() < 2 {
                return Err(Error::InvalidInput(format!("hyperedge {i} has fewer than 2 vertices")));
            }
            if let Some(&v) = e.iter().find(|&&v| v >= self.vertex_count) {
                return Err(Error::InvalidInput(format!("hyperedge {i} references vertex {v}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("hyperedge {i} has weight {w}")));
            }
        }
        Ok(())
    }

    /// Dense `n × |E|` 0/1 incidence matrix.
    pub fn incidence(&self) -> Matrix {
        let mut h = Matrix::zeros(self.vertex_count, self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            for &v in e {
                h.row_mut(v)[j] = 1.0;
            }
        }
        h
    }

    /// `d(v) = Σ_e w(e) h(v, e)`.
    pub fn vertex_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.vertex_count];
        for (e, &w) in self.edges.iter().zip(&self.weights) {
            for &v in e {
                d[v] += w;
            }
        }
        d
    }

    /// `δ(e) = |e|`.
    pub fn edge_degrees(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.len() as f64).collect()
    }
}

pub fn pairwise_distances(vectors: &Matrix) -> Matrix {
    let n = vectors.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(vectors.row(i), vectors.row(j));
            d.row_mut(i)[j] = v;
            d.row_mut(j)[i] = v;
        }
    }
    d
}

/// Median over unordered pairs, floored at [`SIGMA_FLOOR`].
pub fn median_distance(dist: &Matrix) -> f64 {
    let n = dist.rows();
    let mut all: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist[(i, j)]).collect();
    if all.is_empty() {
        return SIGMA_FLOOR;
    }
    all.sort_by(f64::total_cmp);
    let m = all.len();
    let median = if m % 2 == 1 {
        all[m / 2]
    } else {
        0.5 * (all[m / 2 - 1] + all[m / 2])
    };
    median.max(SIGMA_FLOOR)
}

/// The `k` nearest other vertices of `i`, nearest first, ties by index.
pub fn nearest_neighbors(dist: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..dist.rows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
    others.truncate(k);
    others
}

fn check_knn(n: usize, k_nn: usize) -> Result<()> {
    if k_nn == 0 || n <= k_nn {
        return Err(Error::InvalidInput(format!(
            "k-NN construction needs n > k_nn >= 1 (n = {n}, k_nn = {k_nn})"
        )));
    }
    Ok(())
}

/// One hyperedge per vertex: the vertex and its `k_nn` nearest neighbours.
/// The weight is the mean of `exp(−d²/σ²)` over the neighbours' distances to
/// the centre vertex, with `σ` the median pairwise distance.
pub fn build_hypergraph(vectors: &Matrix, k_nn: usize) -> Result<Hypergraph> {
    let n = vectors.rows();
    check_knn(n, k_nn)?;
    let dist = pairwise_distances(vectors);
    let sigma = median_distance(&dist);
    let mut edges = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let nbrs = nearest_neighbors(&dist, i, k_nn);
        let w = nbrs
            .iter()
            .map(|&j| (-(dist[(i, j)] / sigma).powi(2)).exp())
            .sum::<f64>()
            / k_nn as f64;
        let mut e = nbrs;
        e.push(i);
        edges.push(e);
        // Far-away members can underflow the Gaussian; keep the edge usable.
        weights.push(w.max(f64::MIN_POSITIVE));
    }
    Hypergraph::new(n, edges, weights)
}

/// `Δ = I − D_v^{−1/2} H W D_e^{−1} Hᵀ D_v^{−1/2}`.
pub fn hypergraph_laplacian(h: &Hypergraph) -> Result<Matrix> {
    h.validate()?;
    let n = h.vertex_count;
    let dv = h.vertex_degrees();
    if let Some(v) = dv.iter().position(|&d| d <= 0.0) {
        return Err(Error::InvalidInput(format!("vertex {v} belongs to no hyperedge")));
    }
    let inv_sqrt: Vec<f64> = dv.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut theta = Matrix::zeros(n, n);
    for (e, &w) in h.edges.iter().zip(&h.weights) {
        let scale = w / e.len() as f64;
        for &u in e {
            for &v in e {
                theta.row_mut(u)[v] += scale * inv_sqrt[u] * inv_sqrt[v];
            }
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 0.5 * (theta[(i, j)] + theta[(j, i)])
    }))
}

/// Symmetrized Gaussian k-NN graph: `W_ij = exp(−d²/σ²)` when either vertex
/// is among the other's `k_nn` nearest.
pub fn knn_graph_weights(vectors: &Matrix, k_nn: usize) -> Result<Matrix> {
    let n = vectors.rows();
    check_knn(n, k_nn)?;
    let dist = pairwise_distances(vectors);
    let sigma = median_distance(&dist);
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in nearest_neighbors(&dist, i, k_nn) {
            let v = (-(dist[(i, j)] / sigma).powi(2)).exp().max(f64::MIN_POSITIVE);
            w.row_mut(i)[j] = v;
            w.row_mut(j)[i] = v;
        }
    }
    Ok(w)
}

/// `L = I − D^{−1/2} W D^{−1/2}`.
pub fn normalized_laplacian(w: &Matrix) -> Result<Matrix> {
    let n = w.rows();
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    if let Some(v) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::InvalidInput(format!("vertex {v} is isolated")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - w[(i, j)] / (deg[i] * deg[j]).sqrt()
    }))
}
