//! The reality loop: two agents acting on one shared plant, each learning
//! according to its kind, with per-step metrics.
//!
//! Step `k` proceeds as: controls from `x_k`, one plant step, delayed
//! partner sensing plus one identification update (full PALs), an internal
//! episode every `rl_update_interval` steps (PALs) or a real-transition
//! update (baselines), then one metrics record.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::analysis::{average_reward_per_second, detect_first_swing_up, upright_fraction, value_asymmetry_report};
use crate::checkpoint;
use crate::config::{AgentKind, EpisodeStartKind, ExperimentConfig};
use crate::ddpg::{DdpgAgent, DdpgConfig, RlTransition};
use crate::error::{PalError, Result};
use crate::identification::{IdentificationConfig, PartnerIdentifier};
use crate::pendulum::{self, PendulumParams, PendulumState, RewardKind};
use crate::simulation::{run_internal_episode, AgentSlot, EpisodeStart, InternalMdp, ZeroPartner};
use crate::trace::{write_trace, MetricsRecord, RunSummary, ValueAsymmetry};

/// Independent RNG stream derived from the master seed and a stream name.
pub fn stream_rng(master_seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(name.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Settings of an agent's internal simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub episode_length: usize,
    pub train_interval: usize,
    pub start: EpisodeStartKind,
}

/// One learning controller together with everything it owns.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub kind: AgentKind,
    pub slot: AgentSlot,
    pub reward: RewardKind,
    pub ddpg: DdpgAgent,
    pub identifier: Option<PartnerIdentifier>,
    pub sim: Option<SimSettings>,
    id_rng: ChaCha8Rng,
    rl_rng: ChaCha8Rng,
    /// Partner control sensed after the previous step (baseline state feature).
    last_partner_control: f64,
    last_id_loss: f64,
}

impl AgentRuntime {
    fn build(config: &ExperimentConfig, index: usize) -> Result<Self> {
        let tag = format!("agent{}", index + 1);
        let kind = config.agent_kind(index);
        let settings = config.agent(index);
        let limit = config.torque_limit();

        let mut init_rng = stream_rng(config.seed, &format!("{tag}-init"));
        let ddpg_cfg = DdpgConfig {
            buffer_capacity: config.seconds_to_steps(config.rl_buffer_seconds),
            ..settings.ddpg.clone()
        };
        let state_dim = if kind == AgentKind::BaselineDdpg { 3 } else { 2 };
        let ddpg = DdpgAgent::new(state_dim, limit, ddpg_cfg, &mut init_rng)?;

        let identifier = if kind == AgentKind::FullPal {
            let id_cfg = IdentificationConfig {
                buffer_capacity: config.seconds_to_steps(config.identification_buffer_seconds),
                ..settings.identification.clone()
            };
            let mut id_init = stream_rng(config.seed, &format!("{tag}-id-init"));
            Some(PartnerIdentifier::new(2, 1, id_cfg, &mut id_init)?)
        } else {
            None
        };
        let sim = (kind != AgentKind::BaselineDdpg).then(|| SimSettings {
            episode_length: config.seconds_to_steps(config.internal_episode_seconds),
            train_interval: config.sim_train_interval,
            start: config.internal_episode_start,
        });

        let runtime = Self {
            kind,
            slot: if index == 0 { AgentSlot::First } else { AgentSlot::Second },
            reward: config.setup.reward_kinds()[index],
            ddpg,
            identifier,
            sim,
            id_rng: stream_rng(config.seed, &format!("{tag}-id")),
            rl_rng: stream_rng(config.seed, &format!("{tag}-rl")),
            last_partner_control: 0.0,
            last_id_loss: f64::NAN,
        };
        runtime.assert_structure();
        Ok(runtime)
    }

    fn assert_structure(&self) {
        match self.kind {
            AgentKind::BaselineDdpg => assert!(self.identifier.is_none() && self.sim.is_none()),
            AgentKind::ObliviousPal => assert!(self.identifier.is_none() && self.sim.is_some()),
            AgentKind::FullPal => assert!(self.identifier.is_some() && self.sim.is_some()),
        }
    }

    fn baseline_features(&self, state: &PendulumState, partner_control: f64) -> Vec<f64> {
        vec![state.angle, state.angular_velocity, partner_control / self.ddpg.control_limit()]
    }

    /// Control applied in reality at `state`.
    fn control(&mut self, state: &PendulumState) -> f64 {
        match self.kind {
            AgentKind::BaselineDdpg => {
                let features = self.baseline_features(state, self.last_partner_control);
                self.ddpg.act_explore(&features, &mut self.rl_rng)
            }
            _ => self.ddpg.act(&state.to_array()),
        }
    }

    fn internal_episode(&mut self, plant: &PendulumParams, real_state: &PendulumState) -> Result<()> {
        let Some(sim) = self.sim else { return Ok(()) };
        let zero = ZeroPartner;
        let partner: &dyn crate::simulation::ControlLaw = match &self.identifier {
            Some(id) => id,
            None => &zero,
        };
        let mut mdp = InternalMdp::new(*plant, partner, self.reward, self.slot);
        mdp.episode_length = sim.episode_length;
        mdp.train_interval = sim.train_interval;
        mdp.start = match sim.start {
            EpisodeStartKind::ResetDistribution => EpisodeStart::ResetDistribution,
            EpisodeStartKind::CurrentState => EpisodeStart::Fixed(*real_state),
        };
        run_internal_episode(&mut self.ddpg, &mdp, &mut self.rl_rng)?;
        Ok(())
    }

    /// Critic values at `(±probe, 0)`; `None` for baseline agents whose state
    /// includes the partner control.
    pub fn value_asymmetry(&self, probe_angle: f64, resolution: f64) -> Option<ValueAsymmetry> {
        (self.kind != AgentKind::BaselineDdpg).then(|| {
            value_asymmetry_report(self.ddpg.critic(), self.ddpg.control_limit(), probe_angle, resolution)
        })
    }
}

/// A single run in progress or finished.
pub struct Experiment {
    config: ExperimentConfig,
    plant: PendulumParams,
    plant_rng: ChaCha8Rng,
    state: PendulumState,
    agents: [AgentRuntime; 2],
    trace: Vec<MetricsRecord>,
    step: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let plant = config.plant();
        let mut plant_rng = stream_rng(config.seed, "plant");
        let state = pendulum::reset(&mut plant_rng);
        let agents = [AgentRuntime::build(&config, 0)?, AgentRuntime::build(&config, 1)?];
        let steps = config.steps();
        Ok(Self { config, plant, plant_rng, state, agents, trace: Vec::with_capacity(steps), step: 0 })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn trace(&self) -> &[MetricsRecord] {
        &self.trace
    }

    pub fn agents(&self) -> &[AgentRuntime; 2] {
        &self.agents
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.steps()
    }

    /// Advances reality by one time step.
    pub fn step_once(&mut self) -> Result<()> {
        let k = self.step;
        let dt = self.config.dt;
        if self.config.reset_interval > 0.0 && k > 0 && k.is_multiple_of(self.config.seconds_to_steps(self.config.reset_interval)) {
            self.state = pendulum::reset(&mut self.plant_rng);
        }
        let x = self.state;
        let u = [self.agents[0].control(&x), self.agents[1].control(&x)];
        let applied = [self.plant.clip_torque(u[0]), self.plant.clip_torque(u[1])];
        let next = pendulum::step(x, applied[0], applied[1], &self.plant);
        if !next.is_finite() {
            return Err(PalError::NonFinite(format!("plant state {next:?} at t = {}", k as f64 * dt)));
        }
        let rewards = [
            self.agents[0].reward.evaluate(&x, applied[0]),
            self.agents[1].reward.evaluate(&x, applied[1]),
        ];

        let update_rl = (k + 1).is_multiple_of(self.config.rl_update_interval);
        for i in 0..2 {
            let partner_u = applied[1 - i];
            let agent = &mut self.agents[i];
            if let Some(id) = agent.identifier.as_mut() {
                id.record(&x.to_array(), &[partner_u]);
                agent.last_id_loss = id.update(&mut agent.id_rng)?.mse_after;
            }
            match agent.kind {
                AgentKind::BaselineDdpg => {
                    let transition = RlTransition {
                        state: agent.baseline_features(&x, agent.last_partner_control),
                        control: applied[i],
                        reward: rewards[i],
                        next_state: agent.baseline_features(&next, partner_u),
                    };
                    agent.ddpg.observe(transition);
                    if update_rl {
                        agent.ddpg.train_step(&mut agent.rl_rng)?;
                    }
                }
                _ => {
                    if update_rl {
                        agent.internal_episode(&self.plant, &next)?;
                    }
                }
            }
            agent.last_partner_control = partner_u;
        }

        self.trace.push(MetricsRecord {
            time: k as f64 * dt,
            angle: x.angle,
            angular_velocity: x.angular_velocity,
            u1: applied[0],
            u2: applied[1],
            r1: rewards[0],
            r2: rewards[1],
            id_loss1: self.agents[0].last_id_loss,
            id_loss2: self.agents[1].last_id_loss,
        });
        self.state = next;
        self.step += 1;
        Ok(())
    }

    /// Runs to the configured duration. On error the trace holds every
    /// completed step.
    pub fn run(&mut self) -> Result<()> {
        self.run_with_progress(|_, _| {})
    }

    /// As [`Experiment::run`], calling `progress(step, total)` after every step.
    pub fn run_with_progress<F: FnMut(usize, usize)>(&mut self, mut progress: F) -> Result<()> {
        let total = self.config.steps();
        while self.step < total {
            self.step_once()?;
            progress(self.step, total);
        }
        Ok(())
    }

    pub fn summary(&self, abort: Option<&PalError>) -> RunSummary {
        let cfg = &self.config;
        let window_end = cfg.metrics_window.min(self.trace.len() as f64 * cfg.dt);
        let avg = |agent| average_reward_per_second(&self.trace, agent, 0.0, window_end);
        let avg_reward = match (avg(0), avg(1)) {
            (Ok(a), Ok(b)) if window_end > 0.0 => Some([a, b]),
            _ => None,
        };
        RunSummary {
            setup: serde_json::to_value(cfg.setup)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            steps: self.trace.len(),
            completed: abort.is_none() && self.is_finished(),
            abort_reason: abort.map(|e| e.to_string()),
            first_swing_up_time: detect_first_swing_up(&self.trace, cfg.swing_up_tolerance, cfg.swing_up_hold),
            metrics_window: [0.0, window_end],
            avg_reward_per_second: avg_reward,
            upright_fraction: upright_fraction(&self.trace, cfg.swing_up_tolerance, 0.0, window_end),
            value_asymmetry: self.agents[0]
                .value_asymmetry(cfg.value_probe_angle, cfg.value_grid_resolution)
                .filter(|v| v.difference.is_finite()),
        }
    }

    /// Writes `trace.csv`, `summary.json`, and agent/partner checkpoints into `dir`.
    pub fn write_outputs(&self, dir: &Path, abort: Option<&PalError>) -> Result<RunSummary> {
        fs::create_dir_all(dir)?;
        write_trace(&dir.join("trace.csv"), &self.trace)?;
        for (i, agent) in self.agents.iter().enumerate() {
            checkpoint::save_agent(&dir.join(format!("agent{}.ckpt", i + 1)), &agent.ddpg)?;
            if let Some(id) = &agent.identifier {
                checkpoint::save_mlp(&dir.join(format!("agent{}_partner.ckpt", i + 1)), id.model())?;
            }
        }
        let summary = self.summary(abort);
        summary.write(&dir.join("summary.json"))?;
        Ok(summary)
    }
}

/// Outcome of [`run_experiment`].
pub struct RunOutcome {
    pub experiment: Experiment,
    pub summary: RunSummary,
    pub error: Option<PalError>,
}

/// Runs `config` to completion (or abort) and, when `out_dir` is given,
/// writes the trace, summary and checkpoints there. Numerical aborts are
/// reported in the outcome with the partial trace; configuration errors are
/// returned directly.
pub fn run_experiment(config: ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let mut experiment = Experiment::new(config)?;
    let error = experiment.run().err();
    let summary = match out_dir {
        Some(dir) => experiment.write_outputs(dir, error.as_ref())?,
        None => experiment.summary(error.as_ref()),
    };
    Ok(RunOutcome { experiment, summary, error })
}

/// Output directory for a run: the explicit one, else the config's, else `runs/<setup>-seed<N>`.
pub fn resolve_out_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{:?}-seed{}", config.setup, config.seed).to_lowercase()))
}

/// Draws a fresh plant state from the run's plant stream (used by tests).
pub fn sample_reset(master_seed: u64) -> PendulumState {
    let mut rng = stream_rng(master_seed, "plant");
    pendulum::reset(&mut rng)
}
