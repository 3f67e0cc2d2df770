mod common;

use common::bandit;
use tasnet::agent::{forward_features, AgentConfig, Variant};
use tasnet::data_io::{synth_generate, SynthConfig};
use tasnet::numerics::{Matrix, Rng};
use tasnet::rewards::FnReward;
use tasnet::trainer::{train, train_with_reward, TrainConfig};

#[test]
fn estimator_is_unbiased_on_the_bandit() {
    let off = bandit::biased_components();
    assert!(off.is_empty(), "(component, mean, exact, se): {off:?}");
}

#[test]
fn moving_average_baseline_reduces_variance() {
    let (b, var_b, var_0) = bandit::bias_variances();
    assert!(var_b <= var_0, "baseline {b}: {var_b} > {var_0}");
}

#[test]
fn bandit_training_reaches_the_optimum_for_most_seeds() {
    let wins = (0..10)
        .filter(|&seed| {
            let p = bandit::trained_probabilities(seed);
            p[0] > 0.9 && p[1] < 0.1
        })
        .count();
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn bandit_reward_windows_do_not_decrease() {
    let set = bandit::trial_set(200);
    let cfg = TrainConfig {
        learning_rate: 0.00015,
        max_epochs: 100,
        ..bandit::train_config(4)
    };
    let (_, log) = train_with_reward(&set, &cfg, &bandit::stub()).unwrap();
    let windows: Vec<f64> = log
        .epochs
        .chunks(10)
        .map(|w| w.iter().map(|e| e.mean_reward).sum::<f64>() / w.len() as f64)
        .collect();
    for pair in windows.windows(2) {
        assert!(pair[1] >= pair[0], "{windows:?}");
    }
}

#[test]
fn dominant_penalty_pulls_mean_score_to_target() {
    let set = synth_generate(&SynthConfig {
        trial_count: 6,
        length: 48,
        feature_dim: 6,
        fragments_per_trial: 0,
        signal_to_noise: 0.0,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    for (target, lr) in [(0.5, 1e-4), (0.3, 1e-2)] {
        let cfg = TrainConfig {
            agent: AgentConfig {
                variant: Variant::Full,
                gcn_dim: 8,
                gru_hidden: 16,
                segment_len: 16,
            },
            balance: 1e3,
            target_fraction: target,
            learning_rate: lr,
            max_epochs: 100,
            seed: 1,
            ..TrainConfig::default()
        };
        let (params, _) = train(&set, &cfg).unwrap();
        let mean: f64 = set
            .trials
            .iter()
            .map(|t| forward_features(&t.features, &params).unwrap().0.mean())
            .sum::<f64>()
            / set.len() as f64;
        assert!((mean - target).abs() <= 0.05, "target {target}: mean score {mean}");
    }
}

#[test]
fn constant_reward_leaves_only_the_penalty() {
    // With R ≡ b the policy term vanishes; β = 0 then leaves only weight decay.
    let set = bandit::trial_set(1);
    let cfg = TrainConfig {
        balance: 0.0,
        weight_decay: 0.0,
        max_epochs: 5,
        ..bandit::train_config(0)
    };
    let zero = FnReward(|_: &Matrix, _: &[usize]| 0.0);
    let (trained, _) = train_with_reward(&set, &cfg, &zero).unwrap();
    let init = tasnet::agent::AgentParams::init(cfg.agent, 2, &mut Rng::new(0).fork(1)).unwrap();
    assert_eq!(trained, init);
}
