use super::*;
use crate::numerics::Parameters;

fn small_config(variant: Variant) -> AgentConfig {
    AgentConfig {
        variant,
        gcn_dim: 4,
        gru_hidden: 8,
        segment_len: 5,
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn scalar_sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dense `D^{-1/2}(A)D^{-1/2} X W + b` followed by ReLU, entry by entry.
fn gcn_oracle(x: &Matrix, w: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
    let n = x.rows();
    let adj = |i: usize, j: usize| if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 };
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| adj(i, j)).sum()).collect();
    (0..n)
        .map(|i| {
            (0..w.cols())
                .map(|c| {
                    let mut acc = b[(0, c)];
                    for j in 0..n {
                        let a = adj(i, j) / (deg[i].sqrt() * deg[j].sqrt());
                        for d in 0..x.cols() {
                            acc += a * x[(j, d)] * w[(d, c)];
                        }
                    }
                    acc.max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Step-by-step GRU with explicit index loops.
fn gru_oracle(x: &Matrix, p: &GruParams, reverse: bool) -> Vec<Vec<f64>> {
    let h = p.hidden();
    let t_len = x.rows();
    let mut out = vec![vec![0.0; h]; t_len];
    let mut state = vec![0.0; h];
    let steps: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in steps {
        let affine = |w: &Matrix, u: &Matrix, b: &Matrix, j: usize| -> (f64, f64) {
            let xi: f64 = (0..x.cols()).map(|i| x[(t, i)] * w[(i, j)]).sum::<f64>() + b[(0, j)];
            let hi: f64 = (0..h).map(|i| state[i] * u[(i, j)]).sum();
            (xi, hi)
        };
        let mut next = vec![0.0; h];
        for j in 0..h {
            let (xz, hz) = affine(&p.w_z, &p.u_z, &p.b_z, j);
            let (xr, hr) = affine(&p.w_r, &p.u_r, &p.b_r, j);
            let (xn, hn) = affine(&p.w_n, &p.u_n, &p.b_n, j);
            let z = scalar_sigmoid(xz + hz);
            let r = scalar_sigmoid(xr + hr);
            let n = (xn + r * hn).tanh();
            next[j] = (1.0 - z) * n + z * state[j];
        }
        state = next;
        out[t] = state.clone();
    }
    out
}

fn random_gru(input: usize, hidden: usize, rng: &mut Rng) -> GruParams {
    let mut g = GruParams::zeros(input, hidden);
    for m in [
        &mut g.w_z, &mut g.w_r, &mut g.w_n, &mut g.u_z, &mut g.u_r, &mut g.u_n, &mut g.b_z, &mut g.b_r, &mut g.b_n,
    ] {
        m.as_mut_slice().iter_mut().for_each(|v| *v = rng.uniform_range(-0.6, 0.6));
    }
    g
}

/// Parameters with every entry (biases included) drawn uniformly.
fn dense_random_params(config: AgentConfig, dim: usize, scale: f64, rng: &mut Rng) -> AgentParams {
    let mut p = AgentParams::zeros(config, dim);
    for (_, t) in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.uniform_range(-scale, scale));
    }
    p
}

#[test]
fn gcn_single_node_is_plain_affine() {
    let mut rng = Rng::new(1);
    let x = random_matrix(1, 3, &mut rng);
    let w = random_matrix(3, 4, &mut rng);
    let b = random_matrix(1, 4, &mut rng);
    let (out, _) = gcn_forward(&segment(1, 16), &x, &w, &b).unwrap();
    for c in 0..4 {
        let expected = (0..3).map(|d| x[(0, d)] * w[(d, c)]).sum::<f64>() + b[(0, c)];
        assert!((out[(0, c)] - expected.max(0.0)).abs() < 1e-15);
    }
}

#[test]
fn gcn_zero_weights_give_zero() {
    let x = random_matrix(7, 3, &mut Rng::new(2));
    let (out, _) = gcn_forward(&segment(7, 4), &x, &Matrix::zeros(3, 5), &Matrix::zeros(1, 5)).unwrap();
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn gcn_matches_dense_oracle() {
    for seed in 0..5 {
        let mut rng = Rng::new(seed);
        let x = random_matrix(4, 3, &mut rng);
        let w = random_matrix(3, 5, &mut rng);
        let b = random_matrix(1, 5, &mut rng);
        let (out, _) = gcn_forward(&segment(4, 16), &x, &w, &b).unwrap();
        let oracle = gcn_oracle(&x, &w, &b);
        for i in 0..4 {
            for c in 0..5 {
                assert!((out[(i, c)] - oracle[i][c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gcn_segments_are_independent() {
    let mut rng = Rng::new(9);
    let x = random_matrix(10, 2, &mut rng);
    let w = random_matrix(2, 3, &mut rng);
    let b = random_matrix(1, 3, &mut rng);
    let (out, _) = gcn_forward(&segment(10, 4), &x, &w, &b).unwrap();
    for seg in segment(10, 4) {
        let oracle = gcn_oracle(&x.slice_rows(seg.start, seg.end), &w, &b);
        for (i, row) in oracle.iter().enumerate() {
            for c in 0..3 {
                assert!((out[(seg.start + i, c)] - row[c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gru_zero_weights_keep_zero_state() {
    let x = random_matrix(5, 3, &mut Rng::new(3));
    let p = GruParams::zeros(3, 6);
    let (out, _, _) = bigru_forward(&x, &p, &p).unwrap();
    assert_eq!(out.shape(), (5, 12));
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn gru_matches_scalar_oracle() {
    for seed in 0..5 {
        let mut rng = Rng::new(100 + seed);
        let x = random_matrix(3, 4, &mut rng);
        let p = random_gru(4, 5, &mut rng);
        for reverse in [false, true] {
            let (out, _) = gru_forward(&x, &p, reverse).unwrap();
            let oracle = gru_oracle(&x, &p, reverse);
            for t in 0..3 {
                for j in 0..5 {
                    assert!((out[(t, j)] - oracle[t][j]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn bigru_single_step_directions_agree_with_tied_weights() {
    let mut rng = Rng::new(5);
    let x = random_matrix(1, 3, &mut rng);
    let p = random_gru(3, 4, &mut rng);
    let (out, _, _) = bigru_forward(&x, &p, &p).unwrap();
    assert_eq!(&out.row(0)[..4], &out.row(0)[4..]);
}

#[test]
fn bigru_time_reversal_swaps_halves() {
    let mut rng = Rng::new(6);
    let x = random_matrix(9, 3, &mut rng);
    let fwd = random_gru(3, 4, &mut rng);
    let bwd = random_gru(3, 4, &mut rng);
    let reversed = Matrix::from_fn(9, 3, |t, c| x[(8 - t, c)]);
    let (out, _, _) = bigru_forward(&x, &fwd, &bwd).unwrap();
    // Reversing time while exchanging the direction weights mirrors the output.
    let (rev, _, _) = bigru_forward(&reversed, &bwd, &fwd).unwrap();
    for t in 0..9 {
        assert_eq!(&rev.row(t)[..4], &out.row(8 - t)[4..]);
        assert_eq!(&rev.row(t)[4..], &out.row(8 - t)[..4]);
    }
}

#[test]
fn zero_head_scores_one_half() {
    let mut rng = Rng::new(7);
    let mut p = AgentParams::init(small_config(Variant::Full), 3, &mut rng).unwrap();
    p.head_weight = Matrix::zeros(1, p.head_weight.cols());
    let x = random_matrix(11, 3, &mut rng);
    let (scores, _) = forward_features(&x, &p).unwrap();
    assert!(scores.as_slice().iter().all(|&s| s == 0.5));
}

#[test]
fn forward_is_deterministic() {
    let mut rng = Rng::new(8);
    let p = AgentParams::init(AgentConfig::default(), 6, &mut rng).unwrap();
    let x = random_matrix(40, 6, &mut rng);
    let (a, _) = forward_features(&x, &p).unwrap();
    let (b, _) = forward_features(&x, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 40);
}

#[test]
fn forward_matches_composed_oracle() {
    let mut rng = Rng::new(10);
    let cfg = small_config(Variant::Full);
    let p = dense_random_params(cfg, 3, 0.6, &mut rng);
    let x = random_matrix(12, 3, &mut rng);
    let (scores, cache) = forward_features(&x, &p).unwrap();

    let mut local = Matrix::zeros(12, 4);
    for seg in segment(12, cfg.segment_len) {
        let block = gcn_oracle(&x.slice_rows(seg.start, seg.end), p.gcn_weight.as_ref().unwrap(), p.gcn_bias.as_ref().unwrap());
        for (i, row) in block.iter().enumerate() {
            local.row_mut(seg.start + i).copy_from_slice(row);
        }
    }
    let hf = gru_oracle(&local, p.gru_forward.as_ref().unwrap(), false);
    let hb = gru_oracle(&local, p.gru_backward.as_ref().unwrap(), true);
    for t in 0..12 {
        let features: Vec<f64> = local.row(t).iter().chain(&hf[t]).chain(&hb[t]).copied().collect();
        let logit: f64 = features.iter().zip(p.head_weight.row(0)).map(|(a, b)| a * b).sum::<f64>() + p.head_bias[(0, 0)];
        assert!((cache.logits[t] - logit).abs() < 1e-12);
        assert!((scores.as_slice()[t] - scalar_sigmoid(logit)).abs() < 1e-12);
    }
}

#[test]
fn extreme_logits_stay_inside_unit_interval() {
    let mut p = AgentParams::zeros(small_config(Variant::HeadOnly), 1);
    p.head_weight = Matrix::row_vector(vec![1.0]);
    let x = Matrix::new(3, 1, vec![-1e6, 0.0, 1e6]).unwrap();
    let (scores, cache) = forward_features(&x, &p).unwrap();
    assert!(scores.as_slice().iter().all(|&s| s > 0.0 && s < 1.0));
    assert_eq!(cache.clamp_mask(), vec![0.0, 1.0, 0.0]);
}

#[test]
fn near_certain_probabilities_sample_ones() {
    let scores = ImportanceScores::new(vec![0.99999; 10_000]).unwrap();
    let a = sample_actions(&scores, &mut Rng::new(11));
    let mean = a.selected().len() as f64 / 1e4;
    assert!(mean >= 0.999);
}

#[test]
fn fair_coin_sampling_mean() {
    let scores = ImportanceScores::new(vec![0.5; 10_000]).unwrap();
    let a = sample_actions(&scores, &mut Rng::new(12));
    let mean = a.selected().len() as f64 / 1e4;
    assert!((0.49..=0.51).contains(&mean), "{mean}");
    assert_eq!(a, sample_actions(&scores, &mut Rng::new(12)));
}

#[test]
fn head_bias_gradient_by_hand() {
    let p = AgentParams::zeros(small_config(Variant::HeadOnly), 2);
    let x = random_matrix(1, 2, &mut Rng::new(13));
    let (scores, cache) = forward_features(&x, &p).unwrap();
    assert_eq!(scores.as_slice(), &[0.5]);
    let g = grad_log_policy(&ActionVector(vec![true]), &scores, &cache, &p).unwrap();
    assert_eq!(g.head_bias[(0, 0)], 0.5);
}

#[test]
fn all_ones_and_all_zeros_mirror_head_bias_gradient() {
    let mut rng = Rng::new(14);
    let p = dense_random_params(small_config(Variant::Full), 4, 0.3, &mut rng);
    let x = random_matrix(9, 4, &mut rng);
    let (scores, cache) = forward_features(&x, &p).unwrap();
    let ones = grad_log_policy(&ActionVector(vec![true; 9]), &scores, &cache, &p).unwrap();
    let zeros = grad_log_policy(&ActionVector(vec![false; 9]), &scores, &cache, &p).unwrap();
    let p_sum: f64 = scores.as_slice().iter().sum();
    assert!((ones.head_bias[(0, 0)] - (9.0 - p_sum)).abs() < 1e-12);
    assert!((zeros.head_bias[(0, 0)] + p_sum).abs() < 1e-12);
    // d/dz log σ(z) − d/dz log(1 − σ(z)) = 1 at every timestep.
    assert!((ones.head_bias[(0, 0)] - zeros.head_bias[(0, 0)] - 9.0).abs() < 1e-12);
}

#[test]
fn stale_cache_is_rejected() {
    let mut rng = Rng::new(15);
    let p = AgentParams::init(small_config(Variant::Full), 3, &mut rng).unwrap();
    let x = random_matrix(6, 3, &mut rng);
    let (scores, cache) = forward_features(&x, &p).unwrap();
    let short = ActionVector(vec![true; 5]);
    assert!(grad_log_policy(&short, &scores, &cache, &p).is_err());
    let other = AgentParams::init(small_config(Variant::GcnHead), 3, &mut rng).unwrap();
    let a = ActionVector(vec![true; 6]);
    assert!(grad_log_policy(&a, &scores, &cache, &other).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.ckpt");
    let mut rng = Rng::new(16);
    let p = AgentParams::init(small_config(Variant::Full), 3, &mut rng).unwrap();
    save_checkpoint(&path, &p, None).unwrap();
    let q = load_checkpoint(&path).unwrap();
    assert_eq!(p, q);
    let x = random_matrix(7, 3, &mut rng);
    assert_eq!(forward_features(&x, &p).unwrap().0, forward_features(&x, &q).unwrap().0);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.ckpt");
    let p = AgentParams::init(small_config(Variant::HeadOnly), 3, &mut Rng::new(17)).unwrap();
    save_checkpoint(&path, &p, None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: Vec<&str> = text.lines().take(3).collect();
    std::fs::write(&path, cut.join("\n")).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Load { .. })));
}




