//! Environment wrapper and the training loop.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::{action_dim, compute_reward, decode_action, default_action_bound, encode_state, RewardBreakdown};
use super::replay::{Experience, ReplayBuffer};
use super::{Agent, AgentConfig, RewardWeights};
use crate::channel::{build_channels, ChannelSet, RisPhaseProfile};
use crate::error::{Error, Result};
use crate::scenario::{linear_to_db, GeometryConfig, UserLayout};
use crate::numerics::SimRng;

pub const INIT_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;
pub const REPLAY_STREAM: u64 = 3;
/// Episode `e` draws its channel from stream `CHANNEL_STREAM + e`.
pub const CHANNEL_STREAM: u64 = 1 << 32;

/// Fixed user layout whose channel is re-realized per episode (and
/// optionally per step). Without fading every realization is identical.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: GeometryConfig,
    layout: UserLayout,
    profile: Option<RisPhaseProfile>,
    weights: RewardWeights,
    seed: u64,
    redraw_each_step: bool,
    rng: SimRng,
    channels: ChannelSet,
    sigma2: f64,
}

impl Environment {
    pub fn new(
        cfg: GeometryConfig,
        layout: UserLayout,
        profile: Option<RisPhaseProfile>,
        weights: RewardWeights,
        seed: u64,
        redraw_each_step: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SimRng::new(seed, CHANNEL_STREAM);
        let channels = build_channels(&cfg, &layout, profile.as_ref(), &mut rng)?;
        let sigma2 = cfg.noise_power();
        Ok(Self {
            cfg,
            layout,
            profile,
            weights,
            seed,
            redraw_each_step,
            rng,
            channels,
            sigma2,
        })
    }

    pub fn config(&self) -> &GeometryConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &UserLayout {
        &self.layout
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn noise_power(&self) -> f64 {
        self.sigma2
    }

    pub fn state_dim(&self) -> usize {
        2 * self.channels.h_composite.rows() * self.channels.h_composite.cols()
    }

    pub fn action_dim(&self) -> usize {
        action_dim(&self.cfg)
    }

    pub fn state(&self) -> Vec<f64> {
        encode_state(&self.channels.h_composite)
    }

    /// Re-realizes the channel for `episode`.
    pub fn reset(&mut self, episode: usize) -> Result<Vec<f64>> {
        self.rng = SimRng::new(self.seed, CHANNEL_STREAM + episode as u64);
        self.channels = build_channels(&self.cfg, &self.layout, self.profile.as_ref(), &mut self.rng)?;
        Ok(self.state())
    }

    /// Scores an action on the current channel without advancing.
    pub fn evaluate(&self, action: &[f64]) -> Result<RewardBreakdown> {
        let w = decode_action(action, &self.cfg)?;
        compute_reward(&self.channels.h_composite, &w, self.sigma2, &self.cfg, &self.weights)
    }

    /// Applies an action and returns its reward and the next state.
    pub fn step(&mut self, action: &[f64]) -> Result<(RewardBreakdown, Vec<f64>)> {
        let outcome = self.evaluate(action)?;
        if self.redraw_each_step {
            self.channels = build_channels(&self.cfg, &self.layout, self.profile.as_ref(), &mut self.rng)?;
        }
        Ok((outcome, self.state()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub episode: usize,
    pub reward: f64,
    /// Empty during warm-up.
    pub critic_loss: Option<f64>,
    pub total_power_watts: f64,
    pub min_user_sinr_db: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub log: Vec<LogRow>,
    pub agent: Agent,
    /// Deterministic policy scored on the final channel.
    pub final_eval: RewardBreakdown,
    pub final_action: Vec<f64>,
}

impl TrainingOutcome {
    pub fn rewards(&self) -> Vec<f64> {
        self.log.iter().map(|r| r.reward).collect()
    }
}

pub fn evaluate_policy(agent: &Agent, env: &Environment) -> Result<(Vec<f64>, RewardBreakdown)> {
    let action = agent.act(&env.state())?;
    let eval = env.evaluate(&action)?;
    Ok((action, eval))
}

/// Trailing mean over at most `window` entries.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs `max_episodes × steps_per_episode` interaction steps. Learning
/// starts once `warmup_steps` transitions have been collected.
pub fn train(env: &mut Environment, cfg: &AgentConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let a_max = cfg.action_bound.unwrap_or_else(|| default_action_bound(env.config()));
    let mut agent = Agent::new(env.state_dim(), env.action_dim(), a_max, cfg);
    let mut noise_rng = SimRng::new(cfg.seed, NOISE_STREAM);
    let mut replay_rng = SimRng::new(cfg.seed, REPLAY_STREAM);
    let noise_std = if cfg.noise_relative { cfg.noise_std * a_max } else { cfg.noise_std };
    let noise = Normal::new(0.0, noise_std)
        .map_err(|e| Error::InvalidArgument(format!("exploration noise: {e}")))?;
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity)?;
    let k_sat = env.config().k_sat;

    let total = cfg.max_episodes * cfg.steps_per_episode;
    let mut log = Vec::with_capacity(total);
    let mut step = 0;
    let mut train_steps = 0;
    for episode in 0..cfg.max_episodes {
        let mut state = env.reset(episode)?;
        for _ in 0..cfg.steps_per_episode {
            step += 1;
            let mut action = agent.act(&state)?;
            for a in &mut action {
                *a = (*a + noise.sample(&mut noise_rng)).clamp(-a_max, a_max);
            }
            let (outcome, next_state) = env.step(&action)?;
            if !outcome.reward.is_finite() {
                return Err(Error::NonFinite {
                    context: format!(
                        "reward {} at step {step} (episode {episode}): |action| = {:.6e}, power = {:.6e} W, SINR = {:?}",
                        outcome.reward,
                        norm(&action),
                        outcome.total_power,
                        outcome.sinr.per_stream_sinr
                    ),
                });
            }
            buffer.push(Experience::new(state, action, outcome.reward, next_state.clone())?);

            let critic_loss = if step > cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                train_steps += 1;
                let batch = buffer.sample(cfg.batch_size, &mut replay_rng)?;
                let (loss, _) = agent.train_step(&batch, cfg, train_steps).map_err(|e| match e {
                    Error::NonFinite { context } => Error::NonFinite {
                        context: format!(
                            "{context} at step {step} (episode {episode}); last reward {}, power {:.6e} W",
                            outcome.reward, outcome.total_power
                        ),
                    },
                    other => other,
                })?;
                Some(loss)
            } else {
                None
            };

            log.push(LogRow {
                step,
                episode,
                reward: outcome.reward,
                critic_loss,
                total_power_watts: outcome.total_power,
                min_user_sinr_db: linear_to_db(outcome.min_user_sinr(k_sat)),
            });
            state = next_state;
        }
        log::debug!(
            "episode {episode}: mean reward {:.4}",
            log[log.len() - cfg.steps_per_episode..].iter().map(|r| r.reward).sum::<f64>()
                / cfg.steps_per_episode as f64
        );
    }
    let (final_action, final_eval) = evaluate_policy(&agent, env)?;
    Ok(TrainingOutcome {
        log,
        agent,
        final_eval,
        final_action,
    })
}
