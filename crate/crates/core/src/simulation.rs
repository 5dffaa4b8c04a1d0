//! The auxiliary MDP an agent trains in: known plant, partner model and the
//! agent's own reward, plus the episode loop that drives DDPG inside it.

use rand::Rng;

use crate::ddpg::{DdpgAgent, RlTransition};
use crate::error::{PalError, Result};
use crate::identification::PartnerIdentifier;
use crate::pendulum::{self, PendulumParams, PendulumState, RewardKind};

/// Anything that maps a plant state to a (scalar) control.
pub trait ControlLaw {
    fn control(&self, state: &PendulumState) -> f64;
}

impl<F: Fn(&PendulumState) -> f64> ControlLaw for F {
    fn control(&self, state: &PendulumState) -> f64 {
        self(state)
    }
}

/// Partner model of an oblivious agent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPartner;

impl ControlLaw for ZeroPartner {
    fn control(&self, _state: &PendulumState) -> f64 {
        0.0
    }
}

impl ControlLaw for PartnerIdentifier {
    fn control(&self, state: &PendulumState) -> f64 {
        self.predict(&state.to_array())[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentSlot {
    First,
    Second,
}

impl AgentSlot {
    /// Orders `(own, partner)` into `(u1, u2)`.
    pub fn route(self, own: f64, partner: f64) -> (f64, f64) {
        match self {
            AgentSlot::First => (own, partner),
            AgentSlot::Second => (partner, own),
        }
    }
}

/// Where internal episodes start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeStart {
    ResetDistribution,
    Fixed(PendulumState),
}

pub struct InternalMdp<'a> {
    pub plant: PendulumParams,
    pub partner: &'a dyn ControlLaw,
    pub reward: RewardKind,
    pub slot: AgentSlot,
    pub episode_length: usize,
    /// One gradient update per this many simulated steps.
    pub train_interval: usize,
    pub start: EpisodeStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStep {
    pub index: usize,
    pub state: PendulumState,
    pub control: f64,
    pub partner_control: f64,
    pub reward: f64,
    pub next_state: PendulumState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub mean_reward: f64,
    pub train_steps: usize,
    pub mean_critic_loss: Option<f64>,
}

impl<'a> InternalMdp<'a> {
    pub fn new(plant: PendulumParams, partner: &'a dyn ControlLaw, reward: RewardKind, slot: AgentSlot) -> Self {
        Self {
            plant,
            partner,
            reward,
            slot,
            episode_length: 200,
            train_interval: 2,
            start: EpisodeStart::ResetDistribution,
        }
    }

    /// Steps the replica once. The partner control is the model's prediction,
    /// saturated at the plant's torque limit.
    pub fn step(&self, state: &PendulumState, own_control: f64) -> (PendulumState, f64, f64) {
        let partner = self.plant.clip_torque(self.partner.control(state));
        let (u1, u2) = self.slot.route(own_control, partner);
        let next = pendulum::step(*state, u1, u2, &self.plant);
        let reward = self.reward.evaluate(state, self.plant.clip_torque(own_control));
        (next, reward, partner)
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> PendulumState {
        match self.start {
            EpisodeStart::ResetDistribution => pendulum::reset(rng),
            EpisodeStart::Fixed(s) => s,
        }
    }
}

/// Runs one training episode of `agent` inside `mdp`.
///
/// Every simulated step goes into the agent's replay buffer; every
/// `train_interval`-th step triggers one `train_step`.
pub fn run_internal_episode<R: Rng + ?Sized>(
    agent: &mut DdpgAgent,
    mdp: &InternalMdp<'_>,
    rng: &mut R,
) -> Result<EpisodeSummary> {
    run_internal_episode_with(agent, mdp, rng, |_| {})
}

/// As [`run_internal_episode`], handing every simulated step to `on_step`.
pub fn run_internal_episode_with<R, F>(
    agent: &mut DdpgAgent,
    mdp: &InternalMdp<'_>,
    rng: &mut R,
    mut on_step: F,
) -> Result<EpisodeSummary>
where
    R: Rng + ?Sized,
    F: FnMut(&SimStep),
{
    if mdp.episode_length == 0 || mdp.train_interval == 0 {
        return Err(PalError::Config("episode length and train interval must be positive".into()));
    }
    if agent.config().reset_noise_each_episode {
        agent.noise_mut().reset();
    }
    let mut state = mdp.initial_state(rng);
    let mut reward_sum = 0.0;
    let mut loss_sum = 0.0;
    let mut train_steps = 0;
    for index in 0..mdp.episode_length {
        let features = state.to_array();
        let control = agent.act_explore(&features, rng);
        let (next_state, reward, partner_control) = mdp.step(&state, control);
        if !next_state.is_finite() || !reward.is_finite() {
            return Err(PalError::NonFinite(format!(
                "internal simulation diverged at step {index}: {next_state:?}, reward {reward}"
            )));
        }
        on_step(&SimStep { index, state, control, partner_control, reward, next_state });
        agent.observe(RlTransition {
            state: features.to_vec(),
            control,
            reward,
            next_state: next_state.to_array().to_vec(),
        });
        reward_sum += reward;
        if (index + 1) % mdp.train_interval == 0 {
            if let Some(stats) = agent.train_step(rng)? {
                loss_sum += stats.critic_loss;
                train_steps += 1;
            }
        }
        state = next_state;
    }
    Ok(EpisodeSummary {
        steps: mdp.episode_length,
        mean_reward: reward_sum / mdp.episode_length as f64,
        train_steps,
        mean_critic_loss: (train_steps > 0).then(|| loss_sum / train_steps as f64),
    })
}
