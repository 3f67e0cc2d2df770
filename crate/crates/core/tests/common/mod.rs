#![allow(dead_code)]

pub mod dd;
pub mod oracle;

use tasnet::agent::{backward, forward_features, grad_log_policy, sample_actions, AgentConfig, AgentParams, Variant};
use tasnet::numerics::{finite_diff_check, Matrix, Parameters, Rng};
use tasnet::trainer::sampling_regularizer;

/// Shrunken network used for gradient checks.
pub fn small_config(variant: Variant) -> AgentConfig {
    AgentConfig {
        variant,
        gcn_dim: 4,
        gru_hidden: 8,
        segment_len: 5,
    }
}

/// Worst relative error between `grad_log_policy` and central differences
/// of the extended-precision log-policy on one random instance
/// (D in 2..=6, T in 4..=12, every parameter uniform in ±0.5).
pub fn policy_gradient_error(variant: Variant, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (params, x) = random_instance(variant, &mut rng);
    let (scores, cache) = forward_features(&x, &params).unwrap();
    let actions = sample_actions(&scores, &mut rng);
    let analytic = grad_log_policy(&actions, &scores, &cache, &params).unwrap();
    // Differencing against the base value keeps the f64 result small, so
    // its final rounding does not swamp the central difference.
    let base = oracle::log_policy(&x, &params, &actions.0);
    let f = |q: &AgentParams| (oracle::log_policy(&x, q, &actions.0) - base).to_f64();
    finite_diff_check(&params, f, &analytic, 1e-7)
}

/// Random shrunken instance: parameters uniform in ±0.5, features standard
/// normal, D in 2..=6 and T in 4..=12.
fn random_instance(variant: Variant, rng: &mut Rng) -> (AgentParams, Matrix) {
    let dim = 2 + rng.below(5);
    let t_len = 4 + rng.below(9);
    let mut params = AgentParams::zeros(small_config(variant), dim);
    for (_, t) in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.uniform_range(-0.5, 0.5));
    }
    let x = Matrix::from_fn(t_len, dim, |_, _| rng.normal());
    (params, x)
}

/// Worst relative error between the backpropagated sampling penalty and
/// central differences of its extended-precision evaluation.
pub fn regularizer_gradient_error(variant: Variant, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (params, x) = random_instance(variant, &mut rng);
    let target = rng.uniform_range(0.2, 0.8);
    let (scores, cache) = forward_features(&x, &params).unwrap();
    let p = scores.as_slice();
    let (_, grad) = sampling_regularizer(p, target);
    let mask = cache.clamp_mask();
    let d_logits: Vec<f64> = (0..p.len()).map(|t| grad[t] * p[t] * (1.0 - p[t]) * mask[t]).collect();
    let analytic = backward(&params, &cache, &d_logits).unwrap();
    let base = oracle::sampling_penalty(&x, &params, target);
    let f = |q: &AgentParams| (oracle::sampling_penalty(&x, q, target) - base).to_f64();
    finite_diff_check(&params, f, &analytic, 1e-7)
}

pub mod bandit {
    //! Two-timestep bandit: reward 1 iff timestep 1 is selected and
    //! timestep 2 is not.

    use tasnet::agent::{forward_features, AgentConfig, AgentParams, Variant};
    use tasnet::data_io::{Trial, TrialSet};
    use tasnet::numerics::{Matrix, Rng};
    use tasnet::rewards::FnReward;
    use tasnet::trainer::{episode_gradient, train_with_reward, BaselineTable, TrainConfig};

    /// Frozen-parameter sample count for estimator checks.
    pub const SAMPLES: usize = 100_000;
    /// Head weights and bias with low selection probabilities (p₁ = p₂ ≈ 0.1).
    pub const FROZEN: (f64, f64, f64) = (0.0, 0.0, -2.2);

    pub fn reward(selected: &[usize]) -> f64 {
        if selected == [0] {
            1.0
        } else {
            0.0
        }
    }

    pub fn stub() -> FnReward<fn(&Matrix, &[usize]) -> f64> {
        FnReward(|_, s| reward(s))
    }

    /// One-hot rows, so each timestep owns one head weight.
    pub fn features() -> Matrix {
        Matrix::identity(2)
    }

    pub fn trial_set(copies: usize) -> TrialSet {
        let trials = (0..copies)
            .map(|i| Trial::new(format!("bandit{i}"), features(), None, None).unwrap())
            .collect();
        TrialSet::new(trials, 2, None).unwrap()
    }

    pub fn agent() -> AgentConfig {
        AgentConfig {
            variant: Variant::HeadOnly,
            ..AgentConfig::default()
        }
    }

    pub fn train_config(seed: u64) -> TrainConfig {
        TrainConfig {
            agent: agent(),
            learning_rate: 0.1,
            max_epochs: 500,
            seed,
            ..TrainConfig::default()
        }
    }

    /// Head-only parameters `(w₁, w₂, b)`.
    pub fn frozen(w1: f64, w2: f64, b: f64) -> AgentParams {
        let mut p = AgentParams::zeros(agent(), 2);
        p.head_weight = Matrix::row_vector(vec![w1, w2]);
        p.head_bias = Matrix::row_vector(vec![b]);
        p
    }

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    /// Exact `∇J` for `(w₁, w₂, b)`, enumerating the four action vectors:
    /// `Σ_a P(a) R(a) ∇ log P(a)` with `∂ log P/∂z_t = a_t − p_t`.
    pub fn exact_gradient(w1: f64, w2: f64, b: f64) -> [f64; 3] {
        let p = [sigmoid(w1 + b), sigmoid(w2 + b)];
        let mut g = [0.0; 3];
        for mask in 0..4u8 {
            let a = [mask & 1 == 1, mask & 2 == 2];
            let prob: f64 = (0..2).map(|t| if a[t] { p[t] } else { 1.0 - p[t] }).product();
            let selected: Vec<usize> = (0..2).filter(|&t| a[t]).collect();
            let r = reward(&selected);
            let d: Vec<f64> = (0..2).map(|t| f64::from(u8::from(a[t])) - p[t]).collect();
            g[0] += prob * r * d[0];
            g[1] += prob * r * d[1];
            g[2] += prob * r * (d[0] + d[1]);
        }
        g
    }

    /// Single-episode gradients `(∂w₁, ∂w₂, ∂b)` at [`FROZEN`], one per seed.
    pub fn sampled_gradients(baseline: f64) -> Vec<[f64; 3]> {
        let params = frozen(FROZEN.0, FROZEN.1, FROZEN.2);
        (0..SAMPLES as u64)
            .map(|seed| {
                let (g, _) = episode_gradient(&features(), &params, 1, &stub(), baseline, &mut Rng::new(seed)).unwrap();
                [g.head_weight[(0, 0)], g.head_weight[(0, 1)], g.head_bias[(0, 0)]]
            })
            .collect()
    }

    /// Sample mean and unbiased variance.
    pub fn mean_and_variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
        let n = xs.clone().count() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    /// Components whose sample mean lies outside 3 standard errors of the
    /// enumerated gradient, as `(component, mean, exact, se)`.
    pub fn biased_components() -> Vec<(usize, f64, f64, f64)> {
        let exact = exact_gradient(FROZEN.0, FROZEN.1, FROZEN.2);
        let samples = sampled_gradients(0.0);
        (0..3)
            .filter_map(|c| {
                let (mean, var) = mean_and_variance(samples.iter().map(|g| g[c]));
                let se = (var / SAMPLES as f64).sqrt();
                ((mean - exact[c]).abs() > 3.0 * se).then_some((c, mean, exact[c], se))
            })
            .collect()
    }

    /// Moving-average baseline after 2000 frozen-parameter episodes.
    pub fn converged_baseline() -> f64 {
        let params = frozen(FROZEN.0, FROZEN.1, FROZEN.2);
        let mut table = BaselineTable::new(0.9);
        let mut rng = Rng::new(77);
        for _ in 0..2_000 {
            let (_, rewards) = episode_gradient(&features(), &params, 1, &stub(), 0.0, &mut rng).unwrap();
            table.update("bandit", rewards[0].total);
        }
        table.get("bandit")
    }

    /// Variance of the head-bias component with the converged baseline and
    /// with none: `(b, var_b, var_0)`.
    pub fn bias_variances() -> (f64, f64, f64) {
        let b = converged_baseline();
        let (_, var_b) = mean_and_variance(sampled_gradients(b).iter().map(|g| g[2]));
        let (_, var_0) = mean_and_variance(sampled_gradients(0.0).iter().map(|g| g[2]));
        (b, var_b, var_0)
    }

    /// `(p₁, p₂)` after 500 single-trial updates from `seed`.
    pub fn trained_probabilities(seed: u64) -> [f64; 2] {
        let (params, _) = train_with_reward(&trial_set(1), &train_config(seed), &stub()).unwrap();
        let (scores, _) = forward_features(&features(), &params).unwrap();
        [scores.as_slice()[0], scores.as_slice()[1]]
    }
}
