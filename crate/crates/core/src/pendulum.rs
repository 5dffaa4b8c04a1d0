//! The shared two-agent pendulum plant.
//!
//! Angle 0 is upright. Both agents' torques enter the dynamics only through
//! their sum, each saturated at `torque_limit` beforehand.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Angular velocity bound applied after every step and on reset.
pub const MAX_SPEED: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub angle: f64,
    pub angular_velocity: f64,
}

impl PendulumState {
    /// Builds a state, wrapping the angle and clipping the velocity.
    pub fn new(angle: f64, angular_velocity: f64) -> Self {
        Self {
            angle: wrap_angle(angle),
            angular_velocity: angular_velocity.clamp(-MAX_SPEED, MAX_SPEED),
        }
    }

    pub const fn upright() -> Self {
        Self { angle: 0.0, angular_velocity: 0.0 }
    }

    pub const fn hanging() -> Self {
        Self { angle: PI, angular_velocity: 0.0 }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.angle, self.angular_velocity]
    }

    pub fn is_finite(&self) -> bool {
        self.angle.is_finite() && self.angular_velocity.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub dt: f64,
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub torque_limit: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { dt: 0.05, gravity: 10.0, mass: 1.0, length: 1.0, torque_limit: 5.0 }
    }
}

impl PendulumParams {
    pub fn with_torque_limit(torque_limit: f64) -> Self {
        Self { torque_limit, ..Self::default() }
    }

    pub fn clip_torque(&self, u: f64) -> f64 {
        u.clamp(-self.torque_limit, self.torque_limit)
    }

    pub fn is_valid(&self) -> bool {
        [self.dt, self.gravity, self.mass, self.length, self.torque_limit]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Maps any finite angle onto `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    // rem_euclid lands in [0, 2pi], so -pi maps onto pi.
    let a = angle.rem_euclid(two_pi);
    if a > PI {
        a - two_pi
    } else {
        a
    }
}

/// One Euler step of the shared plant. The angle advances with the
/// pre-update velocity.
///
/// # Panics
/// On a non-finite state.
pub fn step(state: PendulumState, u1: f64, u2: f64, params: &PendulumParams) -> PendulumState {
    assert!(state.is_finite(), "pendulum step on non-finite state {state:?}");
    let PendulumParams { dt, gravity: g, mass: m, length: l, .. } = *params;
    let torque = params.clip_torque(u1) + params.clip_torque(u2);
    // -sin(phi + pi) == sin(phi); the latter keeps the upright equilibrium exact.
    let accel = 3.0 * g / (2.0 * l) * state.angle.sin() + 3.0 / (m * l * l) * torque;
    let omega = (state.angular_velocity + accel * dt).clamp(-MAX_SPEED, MAX_SPEED);
    let angle = wrap_angle(state.angle + state.angular_velocity * dt);
    PendulumState { angle, angular_velocity: omega }
}

/// Uniform over `angle in (-pi, pi]`, `omega in (-8, 8]`.
pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> PendulumState {
    // random::<f64>() is in [0, 1); mirror it onto the half-open interval (lo, hi].
    let angle = PI - 2.0 * PI * rng.random::<f64>();
    let angular_velocity = MAX_SPEED - 2.0 * MAX_SPEED * rng.random::<f64>();
    PendulumState { angle, angular_velocity }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    SharedUpright,
    Agent1Inclined,
    Agent2Inclined,
}

impl RewardKind {
    /// Reward of an agent in `state` that applied `own_control`. Partner
    /// controls carry zero weight.
    pub fn evaluate(self, state: &PendulumState, own_control: f64) -> f64 {
        match self {
            RewardKind::SharedUpright => reward_shared(state, own_control),
            RewardKind::Agent1Inclined => reward_agent1(state, own_control),
            RewardKind::Agent2Inclined => reward_agent2(state, own_control),
        }
    }
}

pub fn reward_shared(state: &PendulumState, own_control: f64) -> f64 {
    let phi = wrap_angle(state.angle);
    let omega = state.angular_velocity;
    -phi * phi - 0.1 * omega * omega - 0.01 * own_control * own_control
}

pub fn reward_agent1(state: &PendulumState, own_control: f64) -> f64 {
    let dev = wrap_angle(state.angle).abs() - PI / 4.0;
    let omega = state.angular_velocity;
    -dev * dev - 0.1 * omega * omega - 0.1 * own_control * own_control
}

pub fn reward_agent2(state: &PendulumState, own_control: f64) -> f64 {
    let dev = wrap_angle(state.angle) - PI / 4.0;
    let omega = state.angular_velocity;
    -dev * dev - 0.1 * omega * omega - 0.1 * own_control * own_control
}
