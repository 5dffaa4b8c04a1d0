//! Deterministic policy gradient actor-critic with target networks and
//! Ornstein-Uhlenbeck exploration.
//!
//! The actor has a linear output; its control is saturated at
//! `control_limit` by clipping. During the actor update the critic is
//! evaluated at the clipped control. Where the raw output lies beyond the
//! limit, `dQ/du` reaches the actor only if it points back inside.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};
use crate::nn::{Adam, BackwardSeed, LossKind, Mlp, WeightRange};
use crate::replay::ReplayBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    pub hidden_layers: usize,
    pub actor_hidden_units: usize,
    pub critic_hidden_units: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub gradient_clip: f64,
    /// Items; 10 s of reality at 0.05 s per step. Set by the harness from
    /// seconds, so not part of config files.
    #[serde(skip)]
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub warmup: usize,
    pub critic_loss: LossKind,
    pub weight_range: f64,
    pub ou_theta: f64,
    pub ou_mu: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    /// Reset the exploration process at the start of every internal episode.
    pub reset_noise_each_episode: bool,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 3,
            actor_hidden_units: 16,
            critic_hidden_units: 32,
            actor_learning_rate: 0.001,
            critic_learning_rate: 0.001,
            gradient_clip: 1.0,
            buffer_capacity: 200,
            gamma: 0.99,
            tau: 0.001,
            batch_size: 32,
            warmup: 100,
            critic_loss: LossKind::Mae,
            weight_range: 1.0,
            ou_theta: 0.15,
            ou_mu: 0.0,
            ou_sigma: 0.3,
            ou_dt: 1.0,
            reset_noise_each_episode: true,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PalError::Config(format!("ddpg: {what}")));
        if self.hidden_layers == 0 || self.actor_hidden_units == 0 || self.critic_hidden_units == 0 {
            return bad("networks need at least one non-empty hidden layer");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch size and buffer capacity must be positive");
        }
        if !(self.actor_learning_rate > 0.0 && self.critic_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.gradient_clip > 0.0) {
            return bad("gradient_clip must be positive");
        }
        if !(self.ou_sigma >= 0.0 && self.ou_theta >= 0.0 && self.ou_dt > 0.0) {
            return bad("OU parameters must be non-negative with positive dt");
        }
        Ok(())
    }
}

/// Discretised Ornstein-Uhlenbeck process.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub value: f64,
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl OuNoise {
    pub fn new(theta: f64, mu: f64, sigma: f64, dt: f64) -> Self {
        Self { value: 0.0, theta, mu, sigma, dt }
    }

    pub fn from_config(cfg: &DdpgConfig) -> Self {
        Self::new(cfg.ou_theta, cfg.ou_mu, cfg.ou_sigma, cfg.ou_dt)
    }

    pub fn reset(&mut self) {
        self.value = 0.0;
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.value += self.theta * (self.mu - self.value) * self.dt + self.sigma * self.dt.sqrt() * z;
        self.value
    }

    /// Stationary variance of the discrete recursion.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta - self.theta * self.theta * self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlTransition {
    pub state: Vec<f64>,
    pub control: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

impl RlTransition {
    pub fn is_finite(&self) -> bool {
        self.control.is_finite()
            && self.reward.is_finite()
            && self.state.iter().chain(&self.next_state).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    /// Mean critic value of the actor's (clipped) controls on the batch.
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer<RlTransition>,
    noise: OuNoise,
    control_limit: f64,
    config: DdpgConfig,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        control_limit: f64,
        config: DdpgConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let range = WeightRange::symmetric(config.weight_range);
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(std::iter::repeat_n(config.actor_hidden_units, config.hidden_layers));
        actor_sizes.push(1);
        let mut critic_sizes = vec![state_dim + 1];
        critic_sizes.extend(std::iter::repeat_n(config.critic_hidden_units, config.hidden_layers));
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, &vec![range; actor_sizes.len() - 1], rng)?;
        let critic = Mlp::new(&critic_sizes, &vec![range; critic_sizes.len() - 1], rng)?;
        Self::from_networks(actor, critic, control_limit, config)
    }

    /// Agent around given online networks; targets start as copies.
    pub fn from_networks(actor: Mlp, critic: Mlp, control_limit: f64, config: DdpgConfig) -> Result<Self> {
        config.validate()?;
        if !(control_limit > 0.0 && control_limit.is_finite()) {
            return Err(PalError::Config(format!("control limit must be positive, got {control_limit}")));
        }
        if actor.output_dim() != 1 || critic.output_dim() != 1 || critic.input_dim() != actor.input_dim() + 1 {
            return Err(PalError::Config("actor/critic shapes are inconsistent".into()));
        }
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: Adam::new(&actor, config.actor_learning_rate),
            critic_opt: Adam::new(&critic, config.critic_learning_rate),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            noise: OuNoise::from_config(&config),
            actor,
            critic,
            control_limit,
            config,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn control_limit(&self) -> f64 {
        self.control_limit
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    pub fn buffer(&self) -> &ReplayBuffer<RlTransition> {
        &self.buffer
    }

    pub fn noise(&self) -> &OuNoise {
        &self.noise
    }

    pub fn noise_mut(&mut self) -> &mut OuNoise {
        &mut self.noise
    }

    /// Restores target networks (checkpoint loading).
    pub fn set_targets(&mut self, target_actor: Mlp, target_critic: Mlp) -> Result<()> {
        if target_actor.layer_sizes() != self.actor.layer_sizes()
            || target_critic.layer_sizes() != self.critic.layer_sizes()
        {
            return Err(PalError::Checkpoint("target shapes differ from online networks".into()));
        }
        self.target_actor = target_actor;
        self.target_critic = target_critic;
        Ok(())
    }

    fn clip(&self, u: f64) -> f64 {
        u.clamp(-self.control_limit, self.control_limit)
    }

    /// Deterministic control used in reality.
    pub fn act(&self, state: &[f64]) -> f64 {
        self.clip(self.actor.forward(state)[0])
    }

    /// Actor plus OU noise, saturated.
    pub fn act_explore<R: Rng + ?Sized>(&mut self, state: &[f64], rng: &mut R) -> f64 {
        let raw = self.actor.forward(state)[0];
        let noise = self.noise.sample(rng);
        self.clip(raw + noise)
    }

    pub fn observe(&mut self, transition: RlTransition) {
        self.buffer.push(transition);
    }

    /// Critic estimate `Q(state, control)`.
    pub fn q_value(&self, state: &[f64], control: f64) -> f64 {
        let mut input = state.to_vec();
        input.push(control);
        self.critic.forward(&input)[0]
    }

    /// `max_u Q(state, u)` over the grid `-limit, -limit + res, ..., +limit`.
    pub fn evaluate_state_value(&self, state: &[f64], resolution: f64) -> f64 {
        state_value_on_grid(&self.critic, state, self.control_limit, resolution)
    }

    /// One DDPG update: critic, actor, then both soft target updates.
    /// Returns `None` while the buffer holds fewer than `warmup` transitions.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<TrainStats>> {
        if self.buffer.len() < self.config.warmup || self.buffer.is_empty() {
            return Ok(None);
        }
        let sd = self.state_dim();
        let n = self.config.batch_size;
        let indices = self.buffer.sample_uniform_indices(n, rng)?;

        let mut critic_in = Array2::zeros((n, sd + 1));
        let mut next_states = Array2::zeros((n, sd));
        let mut rewards = Array2::zeros((n, 1));
        for (row, &i) in indices.iter().enumerate() {
            let t = self.buffer.get(i).expect("sampled index in range");
            for j in 0..sd {
                critic_in[[row, j]] = t.state[j];
                next_states[[row, j]] = t.next_state[j];
            }
            critic_in[[row, sd]] = t.control;
            rewards[[row, 0]] = t.reward;
        }

        // Critic target y = r + gamma * Q'(s', mu'(s')).
        let next_controls = self.target_actor.forward_batch(&next_states).mapv(|u| self.clip(u));
        let mut target_in = Array2::zeros((n, sd + 1));
        target_in.slice_mut(s![.., ..sd]).assign(&next_states);
        target_in.slice_mut(s![.., sd..]).assign(&next_controls);
        let targets = critic_targets(&rewards, &self.target_critic.forward_batch(&target_in), self.config.gamma);

        let bp = self
            .critic
            .gradients(&critic_in, BackwardSeed::Target { target: &targets, loss: self.config.critic_loss });
        let critic_loss = bp.loss.unwrap_or(f64::NAN);
        if !critic_loss.is_finite() {
            return Err(PalError::NonFinite(format!("critic loss {critic_loss}")));
        }
        let mut grads = bp.grads;
        grads.clip_norm(self.config.gradient_clip);
        self.critic_opt.step(&mut self.critic, &grads)?;

        // Actor: ascend Q(s, clip(mu(s))).
        let states = critic_in.slice(s![.., ..sd]).to_owned();
        let actor_trace = self.actor.forward_trace(&states);
        let controls = actor_trace.output().mapv(|u| self.clip(u));
        let mut q_in = critic_in;
        q_in.slice_mut(s![.., sd..]).assign(&controls);
        let q_trace = self.critic.forward_trace(&q_in);
        let actor_objective = q_trace.output().mean().unwrap_or(f64::NAN);
        if !actor_objective.is_finite() {
            return Err(PalError::NonFinite(format!("actor objective {actor_objective}")));
        }
        let upstream = Array2::from_elem((n, 1), -1.0 / n as f64);
        let q_bp = self.critic.backward(&q_trace, BackwardSeed::Upstream(&upstream));
        let mut control_grad = q_bp.input_grad.slice(s![.., sd..]).to_owned();
        // Past the limit, only gradients that move the raw output back inside pass.
        let limit = self.control_limit;
        for (g, &raw) in control_grad.iter_mut().zip(actor_trace.output().iter()) {
            if (raw > limit && *g < 0.0) || (raw < -limit && *g > 0.0) {
                *g = 0.0;
            }
        }
        let mut actor_grads = self.actor.backward(&actor_trace, BackwardSeed::Upstream(&control_grad)).grads;
        actor_grads.clip_norm(self.config.gradient_clip);
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        soft_update(&mut self.target_critic, &self.critic, self.config.tau);
        soft_update(&mut self.target_actor, &self.actor, self.config.tau);

        Ok(Some(TrainStats { critic_loss, actor_objective }))
    }
}

/// `y = r + gamma * q_next`, element-wise.
pub fn critic_targets(rewards: &Array2<f64>, next_q: &Array2<f64>, gamma: f64) -> Array2<f64> {
    rewards + &next_q.mapv(|q| gamma * q)
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    target.soft_update_from(online, tau);
}

/// Grid of candidate controls from `-limit` to `+limit` in steps of `resolution`,
/// always including both end points.
pub fn control_grid(limit: f64, resolution: f64) -> Vec<f64> {
    assert!(resolution > 0.0, "grid resolution must be positive");
    let steps = (2.0 * limit / resolution + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| -limit + i as f64 * resolution).collect();
    if let Some(last) = grid.last_mut() {
        if (limit - *last).abs() <= 1e-9 * limit.max(1.0) {
            *last = limit;
        } else {
            grid.push(limit);
        }
    }
    grid
}

/// `max_u q(u)` over [`control_grid`].
pub fn max_over_grid<F: Fn(f64) -> f64>(q: F, limit: f64, resolution: f64) -> f64 {
    control_grid(limit, resolution).into_iter().map(q).fold(f64::NEG_INFINITY, f64::max)
}

/// `max_u critic(state, u)` over [`control_grid`], evaluated as one batch.
pub fn state_value_on_grid(critic: &Mlp, state: &[f64], limit: f64, resolution: f64) -> f64 {
    let grid = control_grid(limit, resolution);
    let sd = state.len();
    let mut inputs = Array2::zeros((grid.len(), sd + 1));
    for (row, &u) in grid.iter().enumerate() {
        for (j, &x) in state.iter().enumerate() {
            inputs[[row, j]] = x;
        }
        inputs[[row, sd]] = u;
    }
    critic.forward_batch(&inputs).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
