//! Deep deterministic policy gradient agent that learns the precoder.
//!
//! Four networks: actor μ, critic Q and slowly blended target copies of
//! both. The state is the packed composite channel, the action is the
//! packed beamformer.
//!
//! Batch norm in training mode over a mini-batch of identical inputs
//! collapses every input to the same normalized value, which would hide
//! the action from the critic. Bootstrap targets and the policy gradient
//! therefore read the critic in inference mode (running statistics); only
//! the regression step itself runs in training mode.

mod codec;
mod replay;
mod train;

pub use codec::{
    action_dim, compute_reward, decode_action, decode_state, default_action_bound, encode_action, encode_state,
    RewardBreakdown, RewardWeights, SINR_FLOOR,
};
pub use replay::{Batch, Experience, ReplayBuffer, DEFAULT_CAPACITY};
pub use train::{
    evaluate_policy, moving_average, train, Environment, LogRow, TrainingOutcome, CHANNEL_STREAM, INIT_STREAM,
    NOISE_STREAM, REPLAY_STREAM,
};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{MlpGrads, MlpParams, Mode};
use crate::numerics::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetUpdate {
    /// Blend by `target_blend` after every training step.
    Soft,
    /// Copy the training networks every `period` training steps.
    HardCopy { period: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub discount: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    /// Exploration noise standard deviation per action coordinate.
    pub noise_std: f64,
    /// Read `noise_std` as a fraction of the action bound instead of an
    /// absolute value.
    pub noise_relative: bool,
    pub steps_per_episode: usize,
    pub max_episodes: usize,
    pub seed: u64,
    pub target_blend: f64,
    pub target_update: TargetUpdate,
    pub reward: RewardWeights,
    pub hidden: Vec<usize>,
    /// Per-coordinate action bound; derived from the power budget when unset.
    pub action_bound: Option<f64>,
    pub replay_capacity: usize,
    pub redraw_channel_each_step: bool,
    /// Global gradient-norm clip applied to both networks.
    pub max_grad_norm: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            learning_rate: 0.01,
            weight_decay: 1e-5,
            batch_size: 16,
            warmup_steps: 50,
            noise_std: 0.1,
            noise_relative: false,
            steps_per_episode: 4000,
            max_episodes: 10,
            seed: 42,
            target_blend: 0.005,
            target_update: TargetUpdate::Soft,
            reward: RewardWeights::default(),
            hidden: vec![256, 128],
            action_bound: None,
            replay_capacity: DEFAULT_CAPACITY,
            redraw_channel_each_step: false,
            max_grad_norm: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount must lie in [0, 1), got {}", self.discount));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate must be positive and weight decay non-negative".into());
        }
        if self.batch_size < 2 {
            return bad("batch size must be at least 2 for batch normalization".into());
        }
        if self.batch_size > self.replay_capacity {
            return bad(format!(
                "batch size {} exceeds replay capacity {}",
                self.batch_size, self.replay_capacity
            ));
        }
        if !(self.noise_std >= 0.0) {
            return bad("exploration noise must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.target_blend) {
            return bad(format!("target blend must lie in [0, 1], got {}", self.target_blend));
        }
        if let TargetUpdate::HardCopy { period: 0 } = self.target_update {
            return bad("hard-copy period must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("at least one non-empty hidden layer is required".into());
        }
        if let Some(b) = self.action_bound {
            if !(b > 0.0) {
                return bad(format!("action bound must be positive, got {b}"));
            }
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return bad(format!("gradient clip must be positive, got {c}"));
            }
        }
        if self.steps_per_episode == 0 || self.max_episodes == 0 {
            return bad("training needs at least one step and one episode".into());
        }
        Ok(())
    }
}

/// The four networks plus the action bound they were built for.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub target_actor: MlpParams,
    pub target_critic: MlpParams,
    pub action_bound: f64,
}

impl Agent {
    pub fn new(state_dim: usize, action_dim: usize, action_bound: f64, cfg: &AgentConfig) -> Self {
        let mut rng = SimRng::new(cfg.seed, INIT_STREAM);
        let actor = MlpParams::actor(state_dim, &cfg.hidden, action_dim, action_bound, &mut rng);
        let critic = MlpParams::critic(state_dim, action_dim, &cfg.hidden, 1.0 / action_bound, &mut rng);
        Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            action_bound,
        }
    }

    /// Deterministic policy action for one state.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let s = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| Error::dim("act", e.to_string()))?;
        Ok(self.actor.predict(&s, None, Mode::Inference)?.into_raw_vec_and_offset().0)
    }

    pub fn update_targets(&mut self, cfg: &AgentConfig, train_step: usize) -> Result<()> {
        match cfg.target_update {
            TargetUpdate::Soft => {
                self.target_actor.blend_from(&self.actor, cfg.target_blend)?;
                self.target_critic.blend_from(&self.critic, cfg.target_blend)
            }
            TargetUpdate::HardCopy { period } if train_step.is_multiple_of(period) => {
                self.target_actor.copy_from(&self.actor)?;
                self.target_critic.copy_from(&self.critic)
            }
            TargetUpdate::HardCopy { .. } => Ok(()),
        }
    }

    /// One critic step, one actor step, then the target update. Returns the
    /// pre-step critic loss and actor objective.
    pub fn train_step(&mut self, batch: &Batch, cfg: &AgentConfig, train_step: usize) -> Result<(f64, f64)> {
        let y = critic_target(batch, &self.target_actor, &self.target_critic, cfg.discount)?;
        let loss = critic_regression_step(&mut self.critic, batch, &y, cfg)?;
        let objective = actor_update(&mut self.actor, &self.critic, &batch.states, cfg)?;
        self.update_targets(cfg, train_step)?;
        Ok((loss, objective))
    }
}

/// `y = r + discount · Q_target(s′, μ_target(s′))`, both targets read in
/// inference mode.
pub fn critic_target(
    batch: &Batch,
    target_actor: &MlpParams,
    target_critic: &MlpParams,
    discount: f64,
) -> Result<Array1<f64>> {
    if discount == 0.0 {
        return Ok(batch.rewards.clone());
    }
    let next_actions = target_actor.predict(&batch.next_states, None, Mode::Inference)?;
    let q = target_critic.predict(&batch.next_states, Some(&next_actions), Mode::Inference)?;
    Ok(&batch.rewards + &(q.column(0).to_owned() * discount))
}

/// Mean squared error `(1/B) Σ (y − Q(s, a))²` in training mode.
pub fn critic_loss(critic: &MlpParams, batch: &Batch, y: &Array1<f64>) -> Result<f64> {
    let q = critic.predict(&batch.states, Some(&batch.actions), Mode::Training)?;
    Ok((&q.column(0) - y).mapv(|d| d * d).mean().unwrap_or(0.0))
}

fn critic_pass(
    critic: &MlpParams,
    batch: &Batch,
    y: &Array1<f64>,
) -> Result<(f64, MlpGrads, crate::neural::ForwardCache)> {
    if y.len() != batch.len() {
        return Err(Error::dim("critic_loss", format!("{} targets for {} samples", y.len(), batch.len())));
    }
    let (q, cache) = critic.forward(&batch.states, Some(&batch.actions), Mode::Training)?;
    let stats = cache.clone();
    let diff = &q.column(0) - y;
    let b = batch.len() as f64;
    let loss = diff.mapv(|d| d * d).sum() / b;
    let grad = (diff * (2.0 / b)).insert_axis(Axis(1));
    let back = critic.backward(cache, &grad)?;
    Ok((loss, back.grads, stats))
}

/// Loss and its parameter gradient, leaving the critic untouched.
pub fn critic_loss_gradient(critic: &MlpParams, batch: &Batch, y: &Array1<f64>) -> Result<(f64, MlpGrads)> {
    critic_pass(critic, batch, y).map(|(l, g, _)| (l, g))
}

/// One gradient step of the critic towards fixed targets `y`; returns the
/// pre-step loss.
pub fn critic_regression_step(critic: &mut MlpParams, batch: &Batch, y: &Array1<f64>, cfg: &AgentConfig) -> Result<f64> {
    let (loss, mut grads, stats) = critic_pass(critic, batch, y)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: format!("critic loss {loss}"),
        });
    }
    clip(&mut grads, cfg.max_grad_norm);
    critic.absorb_batch_statistics(&stats)?;
    critic.optimizer_step(&grads, cfg.learning_rate, cfg.weight_decay)?;
    Ok(loss)
}

/// Computes the bootstrap targets and takes one critic step.
pub fn critic_update(
    critic: &mut MlpParams,
    target_actor: &MlpParams,
    target_critic: &MlpParams,
    batch: &Batch,
    cfg: &AgentConfig,
) -> Result<f64> {
    let y = critic_target(batch, target_actor, target_critic, cfg.discount)?;
    critic_regression_step(critic, batch, &y, cfg)
}

/// Anything that can score state-action pairs and differentiate the score
/// with respect to the action.
pub trait ActionValue {
    fn value_and_action_gradient(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)>;
}

impl ActionValue for MlpParams {
    fn value_and_action_gradient(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
        let (q, cache) = self.forward(states, Some(actions), Mode::Inference)?;
        let back = self.backward(cache, &Array2::ones(q.dim()))?;
        let grad = back
            .grad_side
            .ok_or_else(|| Error::Network("critic has no action input".into()))?;
        Ok((q.column(0).to_owned(), grad))
    }
}

/// Ascends `(1/B) Σ Q(s, μ(s))` by pushing the critic's action gradient back
/// through the actor. The critic is only read. Returns the pre-step
/// objective.
pub fn actor_update<C: ActionValue>(actor: &mut MlpParams, critic: &C, states: &Array2<f64>, cfg: &AgentConfig) -> Result<f64> {
    let (actions, cache) = actor.forward(states, None, Mode::Training)?;
    let (q, dq_da) = critic.value_and_action_gradient(states, &actions)?;
    let b = states.nrows() as f64;
    let objective = q.sum() / b;
    if !objective.is_finite() {
        return Err(Error::NonFinite {
            context: format!("actor objective {objective}"),
        });
    }
    actor.absorb_batch_statistics(&cache)?;
    let mut grads = actor.backward(cache, &(dq_da * (-1.0 / b)))?.grads;
    clip(&mut grads, cfg.max_grad_norm);
    actor.optimizer_step(&grads, cfg.learning_rate, cfg.weight_decay)?;
    Ok(objective)
}

fn clip(grads: &mut MlpGrads, max_norm: Option<f64>) {
    if let Some(max) = max_norm {
        let norm = grads.flatten().iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > max {
            grads.scale(max / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::relative_error;
    use crate::neural::Layer;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn batch_from(rng: &mut SimRng, b: usize, s: usize, a: usize) -> Batch {
        let exps: Vec<Experience> = (0..b)
            .map(|_| {
                Experience::new(
                    (0..s).map(|_| rng.standard_normal()).collect(),
                    (0..a).map(|_| rng.standard_normal()).collect(),
                    rng.standard_normal(),
                    (0..s).map(|_| rng.standard_normal()).collect(),
                )
                .unwrap()
            })
            .collect();
        Batch::from_experiences(&exps.iter().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn defaults_match_the_published_settings() {
        let c = AgentConfig::default();
        assert_eq!(c.discount, 0.99);
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.weight_decay, 1e-5);
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.warmup_steps, 50);
        assert_eq!(c.noise_std, 0.1);
        assert_eq!((c.steps_per_episode, c.max_episodes), (4000, 10));
        assert_eq!(c.seed, 42);
        assert_eq!(c.replay_capacity, 1000);
        c.validate().unwrap();
        assert!(AgentConfig { discount: 1.0, ..c.clone() }.validate().is_err());
        assert!(AgentConfig { batch_size: 2000, ..c }.validate().is_err());
    }

    #[test]
    fn myopic_target_is_the_reward() {
        let mut rng = SimRng::new(0, 0);
        let batch = batch_from(&mut rng, 4, 3, 2);
        let cfg = AgentConfig {
            hidden: vec![4],
            ..Default::default()
        };
        let agent = Agent::new(3, 2, 1.0, &cfg);
        let y = critic_target(&batch, &agent.target_actor, &agent.target_critic, 0.0).unwrap();
        assert_eq!(y, batch.rewards);
    }

    #[test]
    fn bootstrap_arithmetic() {
        // Critic whose output is the constant 2.
        let mut rng = SimRng::new(1, 0);
        let mut critic = MlpParams::critic(1, 1, &[2], 1.0, &mut rng);
        if let Some(Layer::Affine { weight, bias }) = critic.layers_mut().last_mut() {
            weight.fill(0.0);
            bias.fill(2.0);
        }
        let actor = MlpParams::actor(1, &[2], 1, 1.0, &mut rng);
        let exp = Experience::new(vec![0.3], vec![0.1], 1.0, vec![0.5]).unwrap();
        let batch = Batch::from_experiences(&[&exp]).unwrap();
        let y = critic_target(&batch, &actor, &critic, 0.99).unwrap();
        assert_relative_eq!(y[0], 2.98, epsilon = 1e-12);
    }

    #[test]
    fn single_squared_error() {
        let mut critic = MlpParams::new(
            vec![
                Layer::Concat { width: 1, scale: 1.0 },
                Layer::Affine {
                    weight: array![[0.0], [0.0]],
                    bias: array![0.0],
                },
            ],
            1,
        )
        .unwrap();
        let e = Experience::new(vec![1.0], vec![1.0], 1.0, vec![1.0]).unwrap();
        let batch = Batch::from_experiences(&[&e, &e]).unwrap();
        let y = array![1.0, 1.0];
        assert_eq!(critic_loss(&critic, &batch, &y).unwrap(), 1.0);

        // Targets equal to predictions: only weight decay moves parameters.
        if let Layer::Affine { weight, .. } = &mut critic.layers_mut()[1] {
            weight.fill(0.5);
        }
        let y = array![1.0, 1.0];
        let cfg = AgentConfig::default();
        let loss = critic_regression_step(&mut critic, &batch, &y, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        let decayed = 0.5 - 0.01 * 1e-5 * 0.5;
        assert_eq!(critic.flatten(), vec![decayed, decayed, 0.0]);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let mut rng = SimRng::new(7, 0);
        let critic = MlpParams::critic(4, 3, &[6, 5], 0.7, &mut rng);
        let batch = batch_from(&mut rng, 8, 4, 3);
        let y: Array1<f64> = (0..8).map(|_| rng.standard_normal()).collect();
        let (_, grads) = critic_loss_gradient(&critic, &batch, &y).unwrap();
        let theta = critic.flatten();
        let mut probe = critic.clone();
        let h = 1e-5;
        let mut worst = 0.0_f64;
        for (i, (&t, &a)) in theta.iter().zip(&grads.flatten()).enumerate() {
            probe.set_flat(i, t + h);
            let up = critic_loss(&probe, &batch, &y).unwrap();
            probe.set_flat(i, t - h);
            let down = critic_loss(&probe, &batch, &y).unwrap();
            probe.set_flat(i, t);
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h), 1e-5));
        }
        assert!(worst <= 1e-4, "{worst}");
    }

    struct Toy;

    impl ActionValue for Toy {
        fn value_and_action_gradient(&self, _: &Array2<f64>, a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
            Ok((a.column(0).mapv(|x| -(x - 1.0).powi(2)), a.mapv(|x| -2.0 * (x - 1.0))))
        }
    }

    struct Flat;

    impl ActionValue for Flat {
        fn value_and_action_gradient(&self, _: &Array2<f64>, a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
            Ok((Array1::from_elem(a.nrows(), 3.0), Array2::zeros(a.dim())))
        }
    }

    #[test]
    fn flat_critic_leaves_only_decay() {
        let mut rng = SimRng::new(2, 0);
        let mut actor = MlpParams::actor(2, &[3], 2, 1.0, &mut rng);
        let before = actor.clone();
        let states = Array2::from_shape_simple_fn((5, 2), || rng.standard_normal());
        let cfg = AgentConfig::default();
        let obj = actor_update(&mut actor, &Flat, &states, &cfg).unwrap();
        assert_eq!(obj, 3.0);
        for (a, b) in actor.layers().iter().zip(before.layers()) {
            match (a, b) {
                (Layer::Affine { weight, bias }, Layer::Affine { weight: w0, bias: b0 }) => {
                    assert_eq!(bias, b0);
                    for (x, x0) in weight.iter().zip(w0) {
                        assert_eq!(*x, x0 - 0.01 * (0.0 + 1e-5 * x0));
                    }
                }
                (Layer::BatchNorm { gamma, beta, .. }, Layer::BatchNorm { gamma: g0, beta: b0, .. }) => {
                    assert_eq!((gamma, beta), (g0, b0));
                }
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn toy_critic_drives_policy_to_its_peak() {
        let mut rng = SimRng::new(3, 0);
        let mut actor = MlpParams::actor(1, &[8], 1, 2.0, &mut rng);
        let cfg = AgentConfig::default();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..3000 {
            let states = Array2::from_shape_simple_fn((16, 1), || rng.standard_normal());
            last = actor_update(&mut actor, &Toy, &states, &cfg).unwrap();
        }
        assert!(last > -1e-3, "objective {last}");
        let probe = Array2::from_shape_simple_fn((16, 1), || rng.standard_normal());
        for mode in [Mode::Training, Mode::Inference] {
            let a = actor.predict(&probe, None, mode).unwrap();
            assert!(a.iter().all(|x| (x - 1.0).abs() < 0.05), "{mode:?}: {a}");
        }
    }

    #[test]
    fn objective_is_mean_critic_output() {
        let mut rng = SimRng::new(4, 0);
        let mut actor = MlpParams::actor(3, &[4], 2, 1.0, &mut rng);
        let critic = MlpParams::critic(3, 2, &[5, 4], 1.0, &mut rng);
        let states = Array2::from_shape_simple_fn((6, 3), || rng.standard_normal());
        let actions = actor.predict(&states, None, Mode::Training).unwrap();
        let q = critic.predict(&states, Some(&actions), Mode::Inference).unwrap();
        let obj = actor_update(&mut actor, &critic, &states, &AgentConfig::default()).unwrap();
        assert_relative_eq!(obj, q.mean().unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn hard_copy_period() {
        let cfg = AgentConfig {
            hidden: vec![4],
            target_update: TargetUpdate::HardCopy { period: 3 },
            ..Default::default()
        };
        let mut agent = Agent::new(3, 2, 1.0, &cfg);
        agent.actor.set_flat(0, 9.0);
        agent.update_targets(&cfg, 1).unwrap();
        assert_ne!(agent.target_actor.flatten()[0], 9.0);
        agent.update_targets(&cfg, 3).unwrap();
        assert_eq!(agent.target_actor.flatten()[0], 9.0);
    }
}
