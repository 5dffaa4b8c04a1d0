//! Declarative description of one experiment run.
//!
//! Config files are TOML. Top-level keys are flat; per-agent hyperparameters
//! live in optional `[agent1.identification]`, `[agent1.ddpg]` (and `agent2`)
//! tables. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddpg::DdpgConfig;
use crate::error::{PalError, Result};
use crate::identification::IdentificationConfig;
use crate::pendulum::{PendulumParams, RewardKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    Baseline,
    Oblivious,
    Pal,
    PalDifferentRewards,
}

impl Setup {
    pub fn default_torque_limit(self) -> f64 {
        match self {
            Setup::PalDifferentRewards => 10.0,
            _ => 5.0,
        }
    }

    pub fn default_agent_kind(self) -> AgentKind {
        match self {
            Setup::Baseline => AgentKind::BaselineDdpg,
            Setup::Oblivious => AgentKind::ObliviousPal,
            Setup::Pal | Setup::PalDifferentRewards => AgentKind::FullPal,
        }
    }

    pub fn reward_kinds(self) -> [RewardKind; 2] {
        match self {
            Setup::PalDifferentRewards => [RewardKind::Agent1Inclined, RewardKind::Agent2Inclined],
            _ => [RewardKind::SharedUpright, RewardKind::SharedUpright],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Independent learner on real transitions, partner control as extra state.
    BaselineDdpg,
    /// Internal simulation with the partner assumed to apply zero control.
    ObliviousPal,
    /// Identification plus internal simulation.
    FullPal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStartKind {
    ResetDistribution,
    CurrentState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSettings {
    /// Overrides the setup's agent kind (used for ablations).
    pub kind: Option<AgentKind>,
    pub identification: IdentificationConfig,
    pub ddpg: DdpgConfig,
}

fn default_duration() -> f64 {
    300.0
}
fn default_dt() -> f64 {
    0.05
}
fn default_window() -> f64 {
    300.0
}
fn default_id_buffer() -> f64 {
    100.0
}
fn default_rl_buffer() -> f64 {
    10.0
}
fn default_episode_seconds() -> f64 {
    10.0
}
fn default_two() -> usize {
    2
}
fn default_start() -> EpisodeStartKind {
    EpisodeStartKind::ResetDistribution
}
fn default_swing_tol() -> f64 {
    0.2
}
fn default_swing_hold() -> f64 {
    2.0
}
fn default_phi_opt() -> f64 {
    0.3
}
fn default_value_resolution() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setup: Setup,
    /// Seconds of real time.
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Defaults to 5, or 10 for `pal_different_rewards`.
    #[serde(default)]
    pub torque_limit: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Seconds from t = 0 used for the summary's average reward.
    #[serde(default = "default_window")]
    pub metrics_window: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Periodic reset of the real plant in seconds; 0 disables it.
    #[serde(default)]
    pub reset_interval: f64,
    #[serde(default = "default_id_buffer")]
    pub identification_buffer_seconds: f64,
    #[serde(default = "default_rl_buffer")]
    pub rl_buffer_seconds: f64,
    /// Simulated seconds per internal episode.
    #[serde(default = "default_episode_seconds")]
    pub internal_episode_seconds: f64,
    /// Real steps between internal episodes (and between baseline updates).
    #[serde(default = "default_two")]
    pub rl_update_interval: usize,
    /// Simulated steps between gradient updates inside an internal episode.
    #[serde(default = "default_two")]
    pub sim_train_interval: usize,
    #[serde(default = "default_start")]
    pub internal_episode_start: EpisodeStartKind,
    #[serde(default = "default_swing_tol")]
    pub swing_up_tolerance: f64,
    #[serde(default = "default_swing_hold")]
    pub swing_up_hold: f64,
    #[serde(default = "default_phi_opt")]
    pub value_probe_angle: f64,
    #[serde(default = "default_value_resolution")]
    pub value_grid_resolution: f64,
    #[serde(default)]
    pub agent1: AgentSettings,
    #[serde(default)]
    pub agent2: AgentSettings,
}

impl ExperimentConfig {
    /// Defaults for a setup.
    pub fn new(setup: Setup) -> Self {
        Self {
            setup,
            duration: default_duration(),
            dt: default_dt(),
            torque_limit: None,
            seed: 0,
            metrics_window: default_window(),
            out_dir: None,
            reset_interval: 0.0,
            identification_buffer_seconds: default_id_buffer(),
            rl_buffer_seconds: default_rl_buffer(),
            internal_episode_seconds: default_episode_seconds(),
            rl_update_interval: 2,
            sim_train_interval: 2,
            internal_episode_start: EpisodeStartKind::ResetDistribution,
            swing_up_tolerance: default_swing_tol(),
            swing_up_hold: default_swing_hold(),
            value_probe_angle: default_phi_opt(),
            value_grid_resolution: default_value_resolution(),
            agent1: AgentSettings::default(),
            agent2: AgentSettings::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| PalError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PalError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn torque_limit(&self) -> f64 {
        self.torque_limit.unwrap_or_else(|| self.setup.default_torque_limit())
    }

    pub fn plant(&self) -> PendulumParams {
        PendulumParams { dt: self.dt, torque_limit: self.torque_limit(), ..PendulumParams::default() }
    }

    /// Number of real steps, `round(duration / dt)`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn agent(&self, index: usize) -> &AgentSettings {
        match index {
            0 => &self.agent1,
            1 => &self.agent2,
            _ => panic!("two agents only"),
        }
    }

    pub fn agent_kind(&self, index: usize) -> AgentKind {
        self.agent(index).kind.unwrap_or_else(|| self.setup.default_agent_kind())
    }

    pub fn seconds_to_steps(&self, seconds: f64) -> usize {
        ((seconds / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(PalError::Config(what));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.steps() == 0 {
            return bad("duration shorter than one time step".into());
        }
        let limit = self.torque_limit();
        if !(limit > 0.0 && limit.is_finite()) {
            return bad(format!("torque_limit must be positive, got {limit}"));
        }
        if self.setup == Setup::PalDifferentRewards && limit != 10.0 {
            return bad(format!("pal_different_rewards uses torque limit 10, got {limit}"));
        }
        if !(self.metrics_window > 0.0) {
            return bad("metrics_window must be positive".into());
        }
        if !(self.reset_interval >= 0.0) {
            return bad("reset_interval must be non-negative".into());
        }
        for (name, v) in [
            ("identification_buffer_seconds", self.identification_buffer_seconds),
            ("rl_buffer_seconds", self.rl_buffer_seconds),
            ("internal_episode_seconds", self.internal_episode_seconds),
            ("swing_up_tolerance", self.swing_up_tolerance),
            ("swing_up_hold", self.swing_up_hold),
            ("value_grid_resolution", self.value_grid_resolution),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.rl_update_interval == 0 || self.sim_train_interval == 0 {
            return bad("update intervals must be at least 1".into());
        }
        for a in [&self.agent1, &self.agent2] {
            a.identification.validate()?;
            a.ddpg.validate()?;
        }
        Ok(())
    }

    /// Stable short digest of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is always serialisable");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
