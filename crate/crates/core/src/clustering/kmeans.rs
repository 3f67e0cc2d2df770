//! Seeded k-means with k-means++ initialization and best-of restarts.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the relative inertia decrease falls below this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 300,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(data: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = vec![rng.below(n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centre.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut target = rng.uniform() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    data.select_rows(&chosen)
}

fn lloyd(data: &Matrix, mut centroids: Matrix, cfg: &KMeansConfig) -> KMeansResult {
    let (n, dim) = data.shape();
    let k = centroids.rows();
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let mut next_inertia = 0.0;
        for i in 0..n {
            let (c, d) = nearest(data.row(i), &centroids);
            assignments[i] = c;
            next_inertia += d;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            sums.row_mut(c).iter_mut().zip(data.row(i)).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centre.
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids.row_mut(c).iter_mut().zip(sums.row(c)).for_each(|(m, s)| *m = s * inv);
            }
        }
        let improvement = inertia - next_inertia;
        inertia = next_inertia;
        if improvement.is_finite() && improvement <= cfg.tolerance * inertia.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // Final assignment against the final centres.
    inertia = 0.0;
    for i in 0..n {
        let (c, d) = nearest(data.row(i), &centroids);
        assignments[i] = c;
        inertia += d;
    }
    KMeansResult {
        assignments,
        centroids,
        inertia,
    }
}

/// Best of `cfg.restarts` runs by inertia; ties keep the earlier restart.
pub fn kmeans(data: &Matrix, k: usize, cfg: &KMeansConfig, rng: &Rng) -> Result<KMeansResult> {
    if k == 0 || k > data.rows() {
        return Err(Error::InvalidInput(format!(
            "k-means needs 1 <= k <= n (k = {k}, n = {})",
            data.rows()
        )));
    }
    if cfg.restarts == 0 {
        return Err(Error::Config("k-means needs at least one restart".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..cfg.restarts {
        let mut stream = rng.fork(r as u64);
        let result = lloyd(data, plus_plus_seeds(data, k, &mut stream), cfg);
        if best.as_ref().map_or(true, |b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_obvious_groups() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.0, 10.1]]).unwrap();
        let r = kmeans(&data, 2, &KMeansConfig::default(), &Rng::new(0)).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 0.01).abs() < 1e-12);
    }

    #[test]
    fn identical_points_are_handled() {
        let data = Matrix::from_fn(5, 2, |_, _| 1.0);
        let r = kmeans(&data, 3, &KMeansConfig::default(), &Rng::new(1)).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let mut g = Rng::new(5);
        let data = Matrix::from_fn(40, 3, |_, _| g.normal());
        let a = kmeans(&data, 4, &KMeansConfig::default(), &Rng::new(2)).unwrap();
        let b = kmeans(&data, 4, &KMeansConfig::default(), &Rng::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_k() {
        let data = Matrix::zeros(3, 2);
        assert!(kmeans(&data, 0, &KMeansConfig::default(), &Rng::new(0)).is_err());
        assert!(kmeans(&data, 4, &KMeansConfig::default(), &Rng::new(0)).is_err());
    }
}
