//! Fixed-length segmentation and the per-segment chain graph.

use std::ops::Range;

use crate::numerics::{axpy, Matrix};

/// Splits `0..t` into `⌈t/l⌉` consecutive ranges of length `l` (the last
/// one possibly shorter). Ranges are 0-based and half-open.
pub fn segment(t: usize, l: usize) -> Vec<Range<usize>> {
    assert!(l >= 1, "segment length must be positive");
    (0..t.div_ceil(l)).map(|m| m * l..((m + 1) * l).min(t)).collect()
}

fn chain_degree(i: usize, len: usize) -> f64 {
    (1 + usize::from(i > 0) + usize::from(i + 1 < len)) as f64
}

/// Dense `D^{-1/2} A D^{-1/2}` for a chain of `len` nodes with self-loops.
pub fn chain_adjacency(len: usize) -> Matrix {
    Matrix::from_fn(len, len, |i, j| {
        if i.abs_diff(j) <= 1 {
            1.0 / (chain_degree(i, len) * chain_degree(j, len)).sqrt()
        } else {
            0.0
        }
    })
}

/// `Â · m`, block-diagonal over `segments`. `Â` is symmetric, so the same
/// call serves the backward pass.
pub fn propagate(segments: &[Range<usize>], m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for seg in segments {
        let len = seg.len();
        for i in 0..len {
            let di = chain_degree(i, len);
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(len - 1);
            let row = seg.start + i;
            for j in lo..=hi {
                let w = 1.0 / (di * chain_degree(j, len)).sqrt();
                axpy(w, m.row(seg.start + j), out.row_mut(row));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn lengths(t: usize, l: usize) -> Vec<usize> {
        segment(t, l).iter().map(|r| r.len()).collect()
    }

    #[test]
    fn segment_lengths() {
        assert_eq!(lengths(40, 16), vec![16, 16, 8]);
        assert_eq!(lengths(16, 16), vec![16]);
        assert_eq!(lengths(5, 16), vec![5]);
    }

    #[test]
    fn segments_partition_the_range() {
        for t in 1..60 {
            for l in 1..20 {
                let joined: Vec<usize> = segment(t, l).into_iter().flatten().collect();
                assert_eq!(joined, (0..t).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn single_node_adjacency_is_one() {
        assert_eq!(chain_adjacency(1)[(0, 0)], 1.0);
    }

    #[test]
    fn propagate_matches_dense_blocks() {
        let mut rng = Rng::new(4);
        let m = Matrix::from_fn(21, 3, |_, _| rng.normal());
        let segs = segment(21, 8);
        let got = propagate(&segs, &m);
        for seg in &segs {
            let a = chain_adjacency(seg.len());
            let block = a.matmul(&m.slice_rows(seg.start, seg.end)).unwrap();
            for i in 0..seg.len() {
                for c in 0..3 {
                    assert!((got[(seg.start + i, c)] - block[(i, c)]).abs() < 1e-14);
                }
            }
        }
    }
}
