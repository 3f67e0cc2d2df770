//! Extended-precision scalar re-implementation of the agent's log-policy,
//! written from the model equations with plain index loops.

use tasnet::agent::{AgentParams, GruParams, Variant};
use tasnet::numerics::Matrix;

use super::dd::Dd;

fn lift(m: &Matrix) -> Vec<Vec<Dd>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&v| Dd::new(v)).collect()).collect()
}

fn gcn(x: &[Vec<Dd>], w: &Matrix, b: &Matrix, segment_len: usize) -> Vec<Vec<Dd>> {
    let t_len = x.len();
    let (dim, width) = (w.rows(), w.cols());
    let mut out = vec![vec![Dd::ZERO; width]; t_len];
    let mut start = 0;
    while start < t_len {
        let end = (start + segment_len).min(t_len);
        let len = end - start;
        let deg = |i: usize| -> f64 {
            (0..len).filter(|&j| i.abs_diff(j) <= 1).count() as f64
        };
        for i in 0..len {
            for c in 0..width {
                let mut acc = Dd::new(b[(0, c)]);
                for j in 0..len {
                    if i.abs_diff(j) > 1 {
                        continue;
                    }
                    let norm = Dd::ONE / Dd::new(deg(i) * deg(j)).sqrt();
                    let mut xw = Dd::ZERO;
                    for d in 0..dim {
                        xw = xw + x[start + j][d] * Dd::new(w[(d, c)]);
                    }
                    acc = acc + norm * xw;
                }
                out[start + i][c] = acc.max0();
            }
        }
        start = end;
    }
    out
}

fn gru(x: &[Vec<Dd>], p: &GruParams, reverse: bool) -> Vec<Vec<Dd>> {
    let t_len = x.len();
    let h = p.u_z.rows();
    let mut out = vec![vec![Dd::ZERO; h]; t_len];
    let mut state = vec![Dd::ZERO; h];
    let steps: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in steps {
        let affine = |w: &Matrix, u: &Matrix, b: &Matrix, j: usize, state: &[Dd]| -> (Dd, Dd) {
            let mut xa = Dd::new(b[(0, j)]);
            for (i, xi) in x[t].iter().enumerate() {
                xa = xa + *xi * Dd::new(w[(i, j)]);
            }
            let mut ha = Dd::ZERO;
            for (i, hi) in state.iter().enumerate() {
                ha = ha + *hi * Dd::new(u[(i, j)]);
            }
            (xa, ha)
        };
        let mut next = vec![Dd::ZERO; h];
        for j in 0..h {
            let (xz, hz) = affine(&p.w_z, &p.u_z, &p.b_z, j, &state);
            let (xr, hr) = affine(&p.w_r, &p.u_r, &p.b_r, j, &state);
            let (xn, hn) = affine(&p.w_n, &p.u_n, &p.b_n, j, &state);
            let z = (xz + hz).sigmoid();
            let r = (xr + hr).sigmoid();
            let n = (xn + r * hn).tanh();
            next[j] = (Dd::ONE - z) * n + z * state[j];
        }
        state = next;
        out[t] = state.clone();
    }
    out
}

/// Head logits `z_t` in double-double precision.
pub fn logits(features: &Matrix, params: &AgentParams) -> Vec<Dd> {
    let cfg = params.config;
    let x = lift(features);
    let local = params
        .gcn_weight
        .as_ref()
        .map(|w| gcn(&x, w, params.gcn_bias.as_ref().unwrap(), cfg.segment_len));
    let gru_in = local.as_ref().unwrap_or(&x);
    let global = params.gru_forward.as_ref().map(|f| {
        let hf = gru(gru_in, f, false);
        let hb = gru(gru_in, params.gru_backward.as_ref().unwrap(), true);
        (hf, hb)
    });
    (0..x.len())
        .map(|t| {
            let mut h: Vec<Dd> = Vec::new();
            match cfg.variant {
                Variant::HeadOnly => h.extend(&x[t]),
                Variant::GcnHead => h.extend(&local.as_ref().unwrap()[t]),
                Variant::BiGruHead | Variant::Full => {
                    if let Some(l) = &local {
                        h.extend(&l[t]);
                    }
                    let (hf, hb) = global.as_ref().unwrap();
                    h.extend(&hf[t]);
                    h.extend(&hb[t]);
                }
            }
            let mut z = Dd::new(params.head_bias[(0, 0)]);
            for (hi, &w) in h.iter().zip(params.head_weight.row(0)) {
                z = z + *hi * Dd::new(w);
            }
            assert!(z.hi.abs() < 30.0, "oracle instance reached the logit clamp");
            z
        })
        .collect()
}

/// `Σ_t log π(a_t | h_t)` in double-double precision.
pub fn log_policy(features: &Matrix, params: &AgentParams, actions: &[bool]) -> Dd {
    let mut total = Dd::ZERO;
    for (z, &a) in logits(features, params).into_iter().zip(actions) {
        // log σ(z) = −softplus(−z), log(1 − σ(z)) = −softplus(z).
        total = total - if a { (-z).softplus() } else { z.softplus() };
    }
    total
}

/// `(mean_t σ(z_t) − target)²` in double-double precision.
pub fn sampling_penalty(features: &Matrix, params: &AgentParams, target: f64) -> Dd {
    let z = logits(features, params);
    let mut sum = Dd::ZERO;
    for &zt in &z {
        sum = sum + zt.sigmoid();
    }
    let gap = sum / Dd::new(z.len() as f64) - Dd::new(target);
    gap * gap
}
