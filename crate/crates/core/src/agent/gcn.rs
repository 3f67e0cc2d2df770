//! One-layer segment GCN: `ReLU(Â X W + b)` with `Â` block-diagonal over
//! segments.

use std::ops::Range;

use super::segment::propagate;
use crate::error::Result;
use crate::numerics::Matrix;

#[derive(Clone, Debug)]
pub struct GcnCache {
    pub input: Matrix,
    pub pre_activation: Matrix,
}

pub fn gcn_forward(
    segments: &[Range<usize>],
    x: &Matrix,
    weight: &Matrix,
    bias: &Matrix,
) -> Result<(Matrix, GcnCache)> {
    let mut pre = propagate(segments, &x.matmul(weight)?);
    let b = bias.row(0);
    for t in 0..pre.rows() {
        pre.row_mut(t).iter_mut().zip(b).for_each(|(v, b)| *v += b);
    }
    let out = Matrix::from_fn(pre.rows(), pre.cols(), |i, j| pre[(i, j)].max(0.0));
    Ok((
        out,
        GcnCache {
            input: x.clone(),
            pre_activation: pre,
        },
    ))
}

/// Returns `(dW, db, dX)` given the gradient on the GCN output.
pub fn gcn_backward(
    segments: &[Range<usize>],
    cache: &GcnCache,
    weight: &Matrix,
    d_out: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let pre = &cache.pre_activation;
    let d_pre = Matrix::from_fn(pre.rows(), pre.cols(), |i, j| {
        if pre[(i, j)] > 0.0 {
            d_out[(i, j)]
        } else {
            0.0
        }
    });
    let d_agg = propagate(segments, &d_pre);
    let d_weight = cache.input.t_matmul(&d_agg)?;
    let d_bias = Matrix::row_vector(d_pre.column_sums());
    let d_input = d_agg.matmul_t(weight)?;
    Ok((d_weight, d_bias, d_input))
}
