//! Rollout collection and the training loop.
//!
//! Episodes are seeded from `(base_seed, episode_index)` alone, collected
//! by a fixed round-robin assignment over worker threads, and merged back
//! in episode order before each update. Metrics are therefore identical
//! for any worker count; workers change wall-clock time, never results.

use crate::agent::features::FeatureExtractor;
use crate::agent::model::PolicyModel;
use crate::agent::ppo::{
    orientation_dist, position_dist, ppo_update, sample_orientation, sample_position, Adam,
    PpoConfig, PpoError, SampleMode, Transition,
};
use crate::canvas::action_of;
use crate::env::{EnvContext, Episode, EpisodeResult, StepAction};
use crate::geometry::Orientation;
use crate::proxy::ProxyCosts;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub updates: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig { ppo: PpoConfig::default(), updates: 100, workers: 25, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateMetrics {
    pub update: usize,
    pub mean_reward: f64,
    /// Episodes that ran out of legal anchors.
    pub aborts: usize,
    /// Mean proxy costs over completed episodes; absent if all aborted.
    pub mean_costs: Option<ProxyCosts>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct EvalStats {
    pub greedy_reward: f64,
    pub greedy_costs: Option<ProxyCosts>,
    pub greedy_result: EpisodeResult,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub abort_rate: f64,
}

/// Deterministic per-episode seed stream.
fn episode_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Plays one episode with the policy, returning its decisions with returns
/// and advantages already filled in.
pub fn collect_episode(
    ctx: &Arc<EnvContext>,
    fx: &FeatureExtractor,
    model: &PolicyModel,
    seed: u64,
    mode: SampleMode,
    gamma: f64,
) -> Result<(Vec<Transition>, EpisodeResult), PpoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ep = Episode::new(ctx.clone(), seed);
    let (n_rows, n_cols) = (ctx.spec.n_rows, ctx.spec.n_cols);
    let mut steps = Vec::new();
    while !ep.is_done() {
        let g = fx.extract(&ep);
        let trace = model.forward(&g, &fx.adjacency, n_rows, n_cols);
        let mut avail = [false; 4];
        for o in Orientation::ALL {
            avail[o.index()] = ep.mask(o).mask.any();
        }
        let od = orientation_dist(&trace.orient_logits, avail)?;
        let (orientation, lp_or) = sample_orientation(&od, mode, &mut rng);
        let mask = ep.mask(orientation).mask.clone();
        let pd = position_dist(&trace.pos_logits, n_cols, &mask)?;
        let (pi, lp_pos) = sample_position(&pd, mode, &mut rng);
        let cell = pd.cells[pi];
        steps.push(Transition {
            features: g,
            avail,
            mask,
            orientation,
            cell,
            logp_old: lp_or + lp_pos,
            value_old: trace.value,
            ret: 0.0,
            advantage: 0.0,
        });
        ep.step(StepAction { position: action_of(cell.0, cell.1), orientation })
            .expect("sampled action is inside the mask");
    }
    let result = ep.result().expect("episode just finished").clone();
    let horizon = steps.len();
    for (t, tr) in steps.iter_mut().enumerate() {
        tr.ret = gamma.powi((horizon - 1 - t) as i32) * result.reward;
        tr.advantage = tr.ret - tr.value_old;
    }
    Ok((steps, result))
}

/// Collects `episodes` rollouts across `workers` threads with the fixed
/// round-robin split, merged back in episode order.
fn collect_batch(
    ctx: &Arc<EnvContext>,
    fx: &FeatureExtractor,
    model: &PolicyModel,
    base_seed: u64,
    first_episode: u64,
    episodes: usize,
    workers: usize,
    gamma: f64,
) -> Result<Vec<(Vec<Transition>, EpisodeResult)>, PpoError> {
    let workers = workers.max(1);
    let mut merged: Vec<Option<(Vec<Transition>, EpisodeResult)>> = Vec::new();
    merged.resize_with(episodes, || None);
    if workers == 1 {
        for (e, slot) in merged.iter_mut().enumerate() {
            let seed = episode_seed(base_seed, first_episode + e as u64);
            *slot = Some(collect_episode(ctx, fx, model, seed, SampleMode::Stochastic, gamma)?);
        }
    } else {
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut e = w;
                        while e < episodes {
                            let seed = episode_seed(base_seed, first_episode + e as u64);
                            out.push((
                                e,
                                collect_episode(
                                    ctx,
                                    fx,
                                    model,
                                    seed,
                                    SampleMode::Stochastic,
                                    gamma,
                                ),
                            ));
                            e += workers;
                        }
                        out
                    })
                })
                .collect();
            let mut flat = Vec::with_capacity(episodes);
            for h in handles {
                flat.extend(h.join().expect("collector thread panicked"));
            }
            flat
        });
        for (e, r) in results {
            merged[e] = Some(r?);
        }
    }
    Ok(merged.into_iter().map(|r| r.expect("every episode index assigned")).collect())
}

/// Runs `cfg.updates` PPO updates, invoking `hook` after each one with the
/// fresh metrics and the current parameters.
pub fn train_loop_with(
    ctx: &Arc<EnvContext>,
    fx: &FeatureExtractor,
    mut model: PolicyModel,
    cfg: &TrainConfig,
    mut hook: impl FnMut(&UpdateMetrics, &PolicyModel),
) -> Result<(PolicyModel, Vec<UpdateMetrics>), PpoError> {
    cfg.ppo.validate().map_err(PpoError::BadConfig)?;
    let mut opt = Adam::new(model.param_count());
    let mut update_rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, u64::MAX));
    let mut metrics = Vec::with_capacity(cfg.updates);
    let mut episode_counter = 0u64;
    for update in 0..cfg.updates {
        let batch = collect_batch(
            ctx,
            fx,
            &model,
            cfg.seed,
            episode_counter,
            cfg.ppo.episodes_per_update,
            cfg.workers,
            cfg.ppo.gamma,
        )?;
        episode_counter += cfg.ppo.episodes_per_update as u64;

        let mut mean_reward = 0.0;
        let mut aborts = 0usize;
        let mut cost_sum = ProxyCosts { wirelength: 0.0, congestion: 0.0, density: 0.0, hierarchy: 0.0 };
        let mut completed = 0usize;
        let mut buffer = Vec::new();
        for (steps, result) in batch {
            mean_reward += result.reward;
            if result.aborted {
                aborts += 1;
            }
            if let Some(c) = result.costs {
                cost_sum.wirelength += c.wirelength;
                cost_sum.congestion += c.congestion;
                cost_sum.density += c.density;
                cost_sum.hierarchy += c.hierarchy;
                completed += 1;
            }
            buffer.extend(steps);
        }
        mean_reward /= cfg.ppo.episodes_per_update as f64;
        let mean_costs = (completed > 0).then(|| ProxyCosts {
            wirelength: cost_sum.wirelength / completed as f64,
            congestion: cost_sum.congestion / completed as f64,
            density: cost_sum.density / completed as f64,
            hierarchy: cost_sum.hierarchy / completed as f64,
        });
        let stats = ppo_update(
            &mut model,
            &mut opt,
            &fx.adjacency,
            ctx.spec.n_rows,
            ctx.spec.n_cols,
            &buffer,
            &cfg.ppo,
            &mut update_rng,
        )?;
        let m = UpdateMetrics {
            update,
            mean_reward,
            aborts,
            mean_costs,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        };
        hook(&m, &model);
        metrics.push(m);
    }
    Ok((model, metrics))
}

pub fn train_loop(
    ctx: &Arc<EnvContext>,
    fx: &FeatureExtractor,
    model: PolicyModel,
    cfg: &TrainConfig,
) -> Result<(PolicyModel, Vec<UpdateMetrics>), PpoError> {
    train_loop_with(ctx, fx, model, cfg, |_, _| {})
}

/// One greedy rollout plus `episodes` stochastic rollouts.
pub fn evaluate_policy(
    ctx: &Arc<EnvContext>,
    fx: &FeatureExtractor,
    model: &PolicyModel,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats, PpoError> {
    let (_, greedy) = collect_episode(ctx, fx, model, seed, SampleMode::Greedy, 1.0)?;
    let mut rewards = Vec::with_capacity(episodes);
    let mut aborts = 0usize;
    for e in 0..episodes {
        let s = episode_seed(seed, e as u64);
        let (_, r) = collect_episode(ctx, fx, model, s, SampleMode::Stochastic, 1.0)?;
        if r.aborted {
            aborts += 1;
        }
        rewards.push(r.reward);
    }
    let n = rewards.len().max(1) as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(EvalStats {
        greedy_reward: greedy.reward,
        greedy_costs: greedy.costs,
        greedy_result: greedy,
        mean_reward: if episodes == 0 { 0.0 } else { mean },
        std_reward: if episodes == 0 { 0.0 } else { var.sqrt() },
        abort_rate: if episodes == 0 { 0.0 } else { aborts as f64 / n },
    })
}
