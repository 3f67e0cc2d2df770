//! GRU recurrence and its reverse-mode gradient.
//!
//! ```text
//! z = σ(x W_z + h U_z + b_z)
//! r = σ(x W_r + h U_r + b_r)
//! n = tanh(x W_n + r ⊙ (h U_n) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//! with `h₀ = 0`.

use super::params::GruParams;
use crate::error::Result;
use crate::numerics::{sigmoid, Matrix};

/// Per-step activations kept for the backward pass, indexed by timestep.
#[derive(Clone, Debug)]
pub struct GruCache {
    pub reverse: bool,
    pub input: Matrix,
    /// Hidden state fed into step `t`.
    pub h_prev: Matrix,
    pub z: Matrix,
    pub r: Matrix,
    pub n: Matrix,
    /// `h_prev · U_n`.
    pub hu_n: Matrix,
}

fn with_bias(mut m: Matrix, bias: &Matrix) -> Matrix {
    let b = bias.row(0);
    for t in 0..m.rows() {
        m.row_mut(t).iter_mut().zip(b).for_each(|(v, b)| *v += b);
    }
    m
}

fn order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

/// Runs one direction over `x` (T × in). `reverse` processes `T−1 … 0`;
/// row `t` of the output is always the state after consuming `x[t]`.
pub fn gru_forward(x: &Matrix, p: &GruParams, reverse: bool) -> Result<(Matrix, GruCache)> {
    let t_len = x.rows();
    let h = p.hidden();
    let xz = with_bias(x.matmul(&p.w_z)?, &p.b_z);
    let xr = with_bias(x.matmul(&p.w_r)?, &p.b_r);
    let xn = with_bias(x.matmul(&p.w_n)?, &p.b_n);

    let mut out = Matrix::zeros(t_len, h);
    let mut cache = GruCache {
        reverse,
        input: x.clone(),
        h_prev: Matrix::zeros(t_len, h),
        z: Matrix::zeros(t_len, h),
        r: Matrix::zeros(t_len, h),
        n: Matrix::zeros(t_len, h),
        hu_n: Matrix::zeros(t_len, h),
    };
    let mut state = vec![0.0; h];
    let (mut hz, mut hr, mut hn) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    for t in order(t_len, reverse) {
        for buf in [&mut hz, &mut hr, &mut hn] {
            buf.iter_mut().for_each(|v| *v = 0.0);
        }
        p.u_z.vec_mul(&state, &mut hz);
        p.u_r.vec_mul(&state, &mut hr);
        p.u_n.vec_mul(&state, &mut hn);
        cache.h_prev.row_mut(t).copy_from_slice(&state);
        cache.hu_n.row_mut(t).copy_from_slice(&hn);
        for j in 0..h {
            let z = sigmoid(xz[(t, j)] + hz[j]);
            let r = sigmoid(xr[(t, j)] + hr[j]);
            let n = (xn[(t, j)] + r * hn[j]).tanh();
            cache.z.row_mut(t)[j] = z;
            cache.r.row_mut(t)[j] = r;
            cache.n.row_mut(t)[j] = n;
            state[j] = (1.0 - z) * n + z * state[j];
        }
        out.row_mut(t).copy_from_slice(&state);
    }
    Ok((out, cache))
}

/// Gradients of one direction given `d_out` (T × H) on its outputs.
/// Returns parameter gradients and the gradient on the input sequence.
pub fn gru_backward(cache: &GruCache, p: &GruParams, d_out: &Matrix) -> Result<(GruParams, Matrix)> {
    let t_len = cache.input.rows();
    let h = p.hidden();
    let mut da_z = Matrix::zeros(t_len, h);
    let mut da_r = Matrix::zeros(t_len, h);
    let mut da_n = Matrix::zeros(t_len, h);
    // Gradient on `h_prev · U_n`, which differs from `da_n` by the reset gate.
    let mut d_hu_n = Matrix::zeros(t_len, h);

    let mut carry = vec![0.0; h];
    for t in order(t_len, !cache.reverse) {
        let (z, r, n) = (cache.z.row(t), cache.r.row(t), cache.n.row(t));
        let (h_prev, hu_n) = (cache.h_prev.row(t), cache.hu_n.row(t));
        let mut d_prev = vec![0.0; h];
        for j in 0..h {
            let dh = d_out[(t, j)] + carry[j];
            let dz = dh * (h_prev[j] - n[j]);
            let dn = dh * (1.0 - z[j]);
            d_prev[j] = dh * z[j];
            let dan = dn * (1.0 - n[j] * n[j]);
            let dr = dan * hu_n[j];
            da_z.row_mut(t)[j] = dz * z[j] * (1.0 - z[j]);
            da_r.row_mut(t)[j] = dr * r[j] * (1.0 - r[j]);
            da_n.row_mut(t)[j] = dan;
            d_hu_n.row_mut(t)[j] = dan * r[j];
        }
        p.u_z.mul_vec_acc(da_z.row(t), &mut d_prev);
        p.u_r.mul_vec_acc(da_r.row(t), &mut d_prev);
        p.u_n.mul_vec_acc(d_hu_n.row(t), &mut d_prev);
        carry = d_prev;
    }

    let x = &cache.input;
    let hp = &cache.h_prev;
    let grads = GruParams {
        w_z: x.t_matmul(&da_z)?,
        w_r: x.t_matmul(&da_r)?,
        w_n: x.t_matmul(&da_n)?,
        u_z: hp.t_matmul(&da_z)?,
        u_r: hp.t_matmul(&da_r)?,
        u_n: hp.t_matmul(&d_hu_n)?,
        b_z: Matrix::row_vector(da_z.column_sums()),
        b_r: Matrix::row_vector(da_r.column_sums()),
        b_n: Matrix::row_vector(da_n.column_sums()),
    };
    let mut d_x = da_z.matmul_t(&p.w_z)?;
    d_x.add_assign(&da_r.matmul_t(&p.w_r)?);
    d_x.add_assign(&da_n.matmul_t(&p.w_n)?);
    Ok((grads, d_x))
}
