//! REINFORCE training of the scoring agent.
//!
//! Per trial and epoch: one forward pass, `N` sampled episodes scored by the
//! reward, a baselined policy gradient, the sampling-percentage penalty, and
//! one Adam step on `β·L_sampling − Ĵ`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{backward, forward_features, sample_actions, AgentConfig, AgentParams, ForwardCache, ImportanceScores};
use crate::data_io::{write_atomic, OutputMeta, TrialSet};
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, Matrix, Rng};
use crate::rewards::{EpisodeReward, RewardBreakdown, RewardCombo};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub agent: AgentConfig,
    pub reward: RewardCombo,
    /// Episodes `N` per trial and update.
    pub episodes: usize,
    /// Target selection fraction `ϑ`.
    pub target_fraction: f64,
    /// Weight `β` of the sampling penalty.
    pub balance: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub baseline_momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            reward: RewardCombo::default(),
            episodes: 5,
            target_fraction: 0.5,
            balance: 0.01,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            max_epochs: 100,
            baseline_momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.episodes == 0 {
            return fail("train.episodes must be >= 1");
        }
        if !(self.target_fraction > 0.0 && self.target_fraction < 1.0) {
            return fail("train.target_fraction must lie in (0, 1)");
        }
        if !(self.balance >= 0.0 && self.balance.is_finite()) {
            return fail("train.balance must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.baseline_momentum) {
            return fail("train.baseline_momentum must lie in [0, 1)");
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Per-trial moving average of episode rewards.
///
/// An entry reads 0 until its trial is first updated; the first update
/// stores the observed mean reward, later ones blend with `momentum`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineTable {
    momentum: f64,
    values: BTreeMap<String, f64>,
}

impl BaselineTable {
    pub fn new(momentum: f64) -> Self {
        Self {
            momentum,
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, trial_id: &str) -> f64 {
        self.values.get(trial_id).copied().unwrap_or(0.0)
    }

    pub fn update(&mut self, trial_id: &str, mean_reward: f64) -> f64 {
        let m = self.momentum;
        let b = self
            .values
            .entry(trial_id.to_string())
            .and_modify(|b| *b = m * *b + (1.0 - m) * mean_reward)
            .or_insert(mean_reward);
        *b
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `((1/T)Σp − ϑ)²` and its gradient with respect to each `p_t`.
pub fn sampling_regularizer(scores: &[f64], target: f64) -> (f64, Vec<f64>) {
    let t = scores.len() as f64;
    let gap = scores.iter().sum::<f64>() / t - target;
    (gap * gap, vec![2.0 * gap / t; scores.len()])
}

/// Result of `N` episodes on one trial.
#[derive(Clone, Debug)]
pub struct Episodes {
    pub scores: ImportanceScores,
    pub cache: ForwardCache,
    pub rewards: Vec<RewardBreakdown>,
    /// `∂Ĵ/∂z_t`: the baselined, episode-averaged policy gradient on the logits.
    pub logit_gradient: Vec<f64>,
}

impl Episodes {
    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().map(|r| r.total).sum::<f64>() / self.rewards.len() as f64
    }
}

/// Runs `n` episodes from one forward pass and accumulates
/// `(1/N) Σ_n (R_n − b)(a_t^n − p_t)` per logit.
pub fn run_episodes<R: EpisodeReward + ?Sized>(
    features: &Matrix,
    params: &AgentParams,
    n: usize,
    reward: &R,
    baseline: f64,
    rng: &mut Rng,
) -> Result<Episodes> {
    let (scores, cache) = forward_features(features, params)?;
    let mask = cache.clamp_mask();
    let p = scores.as_slice();
    let mut logit_gradient = vec![0.0; p.len()];
    let mut rewards = Vec::with_capacity(n);
    for _ in 0..n {
        let actions = sample_actions(&scores, rng);
        let r = reward.evaluate(features, &actions.selected());
        let advantage = (r.total - baseline) / n as f64;
        if advantage != 0.0 {
            for (t, &a) in actions.0.iter().enumerate() {
                logit_gradient[t] += advantage * mask[t] * (f64::from(u8::from(a)) - p[t]);
            }
        }
        rewards.push(r);
    }
    Ok(Episodes {
        scores,
        cache,
        rewards,
        logit_gradient,
    })
}

/// Baselined REINFORCE estimate of `∇J`, pointing uphill in reward.
pub fn episode_gradient<R: EpisodeReward + ?Sized>(
    features: &Matrix,
    params: &AgentParams,
    n: usize,
    reward: &R,
    baseline: f64,
    rng: &mut Rng,
) -> Result<(AgentParams, Vec<RewardBreakdown>)> {
    let ep = run_episodes(features, params, n, reward, baseline, rng)?;
    let grad = backward(params, &ep.cache, &ep.logit_gradient)?;
    Ok((grad, ep.rewards))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_r_rep: f64,
    pub mean_r_sim: f64,
    pub mean_reg_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_csv(&self, meta: Option<&OutputMeta>) -> String {
        let mut out = String::new();
        if let Some(m) = meta {
            writeln!(out, "# config_hash={} seed={}", m.config_hash, m.seed).unwrap();
        }
        out.push_str("epoch,mean_reward,mean_r_rep,mean_r_sim,mean_reg_loss\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.epoch, e.mean_reward, e.mean_r_rep, e.mean_r_sim, e.mean_reg_loss
            )
            .unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path, meta: Option<&OutputMeta>) -> Result<()> {
        write_atomic(path, self.to_csv(meta).as_bytes())
    }
}

/// Trains with the configured reward combination.
pub fn train(set: &TrialSet, cfg: &TrainConfig) -> Result<(AgentParams, TrainLog)> {
    train_with_reward(set, cfg, &cfg.reward)
}

/// Trains with any episode reward. Fully determined by `cfg.seed`.
pub fn train_with_reward<R: EpisodeReward + ?Sized>(
    set: &TrialSet,
    cfg: &TrainConfig,
    reward: &R,
) -> Result<(AgentParams, TrainLog)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty trial set".into()));
    }
    let root = Rng::new(cfg.seed);
    let mut params = AgentParams::init(cfg.agent, set.feature_dim, &mut root.fork(1))?;
    let mut order_rng = root.fork(2);
    let mut episode_rng = root.fork(3);
    let mut adam = AdamState::new(cfg.adam())?;
    let mut baselines = BaselineTable::new(cfg.baseline_momentum);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order_rng.shuffle(&mut order);
        let (mut sum_r, mut sum_rep, mut sum_sim, mut sum_reg, mut episodes) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for &i in &order {
            let trial = &set.trials[i];
            let diverged = |msg: String| Error::Training {
                epoch,
                trial: trial.id.clone(),
                msg,
            };
            let b = baselines.get(&trial.id);
            let ep = run_episodes(&trial.features, &params, cfg.episodes, reward, b, &mut episode_rng)?;
            let p = ep.scores.as_slice();
            let (reg_loss, reg_grad) = sampling_regularizer(p, cfg.target_fraction);
            let mean_r = ep.mean_reward();
            if !reg_loss.is_finite() || !mean_r.is_finite() {
                return Err(diverged(format!("non-finite loss (reward {mean_r}, penalty {reg_loss})")));
            }
            // Descend β·L_sampling − Ĵ; the penalty reaches the logits via σ'.
            let mask = ep.cache.clamp_mask();
            let d_logits: Vec<f64> = (0..p.len())
                .map(|t| cfg.balance * reg_grad[t] * p[t] * (1.0 - p[t]) * mask[t] - ep.logit_gradient[t])
                .collect();
            let grad = backward(&params, &ep.cache, &d_logits)?;
            adam.step(&mut params, &grad).map_err(|e| diverged(e.to_string()))?;
            baselines.update(&trial.id, mean_r);

            sum_r += ep.rewards.iter().map(|r| r.total).sum::<f64>();
            sum_rep += ep.rewards.iter().map(|r| r.r_rep).sum::<f64>();
            sum_sim += ep.rewards.iter().map(|r| r.r_sim).sum::<f64>();
            episodes += ep.rewards.len();
            sum_reg += reg_loss;
        }
        let n = episodes as f64;
        log.epochs.push(EpochLog {
            epoch,
            mean_reward: sum_r / n,
            mean_r_rep: sum_rep / n,
            mean_r_sim: sum_sim / n,
            mean_reg_loss: sum_reg / set.len() as f64,
        });
    }
    Ok((params, log))
}
