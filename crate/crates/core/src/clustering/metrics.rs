//! Cluster-to-class alignment, accuracy / F1 / NMI, and temporal IoU recall.

use serde::{Deserialize, Serialize};

use crate::data_io::Interval;
use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (row-major `n × n`).
/// Returns `assign[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    // Potentials-based O(n³) formulation, 1-based with a sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_v = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = inf;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < min_v[col] {
                    min_v[col] = cur;
                    way[col] = col0;
                }
                if min_v[col] < delta {
                    delta = min_v[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assign[owner[col] - 1] = col - 1;
        }
    }
    assign
}

/// Relabels by order of first appearance: the first distinct value becomes
/// 0, the next 1, and so on.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|(k, _)| *k == l) {
            Some(&(_, v)) => v,
            None => {
                let v = map.len();
                map.push((l, v));
                v
            }
        })
        .collect()
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    (table, ka, kb)
}

/// Order-independent sum, so that results do not depend on label order.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    -sorted_sum(
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .collect(),
    )
}

/// Normalized mutual information with arithmetic-mean normalization.
/// Two single-cluster partitions count as identical (NMI 1).
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("nmi", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("nmi of empty labelings".into()));
    }
    let n = a.len() as f64;
    let (table, ka, kb) = contingency(a, b);
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<usize> = (0..kb).map(|j| (0..ka).map(|i| table[i][j]).sum()).collect();
    let mut terms = Vec::new();
    for i in 0..ka {
        for j in 0..kb {
            let nij = table[i][j];
            if nij > 0 {
                let pij = nij as f64 / n;
                terms.push(pij * (nij as f64 * n / (row[i] as f64 * col[j] as f64)).ln());
            }
        }
    }
    let mi = sorted_sum(terms).max(0.0);
    let ha = entropy(row.into_iter(), n);
    let hb = entropy(col.into_iter(), n);
    let denom = 0.5 * (ha + hb);
    if denom <= 0.0 {
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub p_acc: f64,
    pub p_f: f64,
    pub nmi: f64,
}

/// Maps each cluster to a class by maximum-overlap assignment.
/// Clusters left without a class map to `usize::MAX`.
pub fn cluster_to_class(assignments: &[usize], labels: &[usize]) -> Vec<usize> {
    let (table, kc, kl) = contingency(assignments, labels);
    let size = kc.max(kl);
    let max = assignments.len() as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let overlap = if i < kc && j < kl { table[i][j] } else { 0 };
                    max - overlap as f64
                })
                .collect()
        })
        .collect();
    let assign = hungarian(&cost);
    (0..kc).map(|i| if assign[i] < kl { assign[i] } else { usize::MAX }).collect()
}

/// Accuracy, F1 and NMI after optimal alignment. F1 is macro-averaged over
/// classes, except for two classes where it is the F1 of class 1.
pub fn align_and_score(assignments: &[usize], labels: &[usize], class_count: usize) -> Result<Scores> {
    if assignments.len() != labels.len() {
        return Err(Error::dims("align_and_score", labels.len(), assignments.len()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::InvalidInput(format!("label {l} outside [0, {class_count})")));
    }
    let clusters = canonical_labels(assignments);
    let mapping = cluster_to_class(&clusters, labels);
    let predicted: Vec<usize> = clusters.iter().map(|&c| mapping[c]).collect();
    let n = labels.len();
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    let f1_of = |class: usize| {
        let tp = predicted.iter().zip(labels).filter(|(p, l)| **p == class && **l == class).count();
        let fp = predicted.iter().zip(labels).filter(|(p, l)| **p == class && **l != class).count();
        let fneg = predicted.iter().zip(labels).filter(|(p, l)| **p != class && **l == class).count();
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let p_f = if class_count == 2 {
        f1_of(1)
    } else {
        (0..class_count).map(f1_of).sum::<f64>() / class_count as f64
    };
    Ok(Scores {
        p_acc: correct as f64 / n as f64,
        p_f,
        nmi: nmi(&clusters, labels)?,
    })
}

/// Temporal IoU of two half-open intervals.
pub fn tiou(a: Interval, b: Interval) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(format!(
            "tIoU needs non-empty intervals, got [{}, {}) and [{}, {})",
            a.start, a.end, b.start, b.end
        )));
    }
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start));
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Number of truth intervals matched by a prediction with tIoU ≥ `tau`.
/// Pairs are taken greedily by descending tIoU (ties: earlier truth, then
/// earlier prediction); each prediction and truth is used at most once.
pub fn matched_count(predicted: &[Interval], truth: &[Interval], tau: f64) -> Result<usize> {
    let mut pairs = Vec::new();
    for (ti, &t) in truth.iter().enumerate() {
        for (pi, &p) in predicted.iter().enumerate() {
            let v = tiou(p, t)?;
            if v >= tau && v > 0.0 {
                pairs.push((v, ti, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut pred_used = vec![false; predicted.len()];
    let mut matched = 0;
    for (_, ti, pi) in pairs {
        if !truth_used[ti] && !pred_used[pi] {
            truth_used[ti] = true;
            pred_used[pi] = true;
            matched += 1;
        }
    }
    Ok(matched)
}

/// Fraction of truth intervals recalled at threshold `tau`.
pub fn recall_at(predicted: &[Interval], truth: &[Interval], tau: f64) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("recall needs at least one truth interval".into()));
    }
    Ok(matched_count(predicted, truth, tau)? as f64 / truth.len() as f64)
}
