//! Learning controllers for a two-agent pendulum swing-up.
//!
//! Each agent either learns from real transitions with the partner control
//! as extra state, or learns entirely inside an internal simulation whose
//! partner is a learned model of the other agent (or assumed passive).

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod ddpg;
pub mod error;
pub mod experiment;
pub mod identification;
pub mod nn;
pub mod pendulum;
pub mod replay;
pub mod simulation;
pub mod trace;

pub use config::{AgentKind, ExperimentConfig, Setup};
pub use ddpg::{DdpgAgent, DdpgConfig};
pub use error::{PalError, Result};
pub use experiment::{run_experiment, Experiment, RunOutcome};
pub use identification::{IdentificationConfig, PartnerIdentifier};
pub use nn::{Adam, Mlp};
pub use pendulum::{PendulumParams, PendulumState, RewardKind};
pub use replay::{ReplayBuffer, SamplingStrategy};
pub use trace::{MetricsRecord, RunSummary};
