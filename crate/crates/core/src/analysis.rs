//! Trace statistics: windowed reward rates, swing-up detection, hold quality,
//! and the critic-based value asymmetry probe.

use crate::ddpg::{max_over_grid, state_value_on_grid};
use crate::error::{PalError, Result};
use crate::nn::Mlp;
use crate::pendulum::wrap_angle;
use crate::trace::{MetricsRecord, ValueAsymmetry};

/// Time step of a trace, taken from its first two rows.
pub fn trace_dt(trace: &[MetricsRecord]) -> Option<f64> {
    match trace {
        [a, b, ..] => Some(b.time - a.time),
        _ => None,
    }
}

fn in_window(rec: &MetricsRecord, start: f64, end: f64) -> bool {
    // Half-open window with a tolerance for accumulated float error in time stamps.
    let eps = 1e-9;
    rec.time >= start - eps && rec.time < end - eps
}

/// Sum of `agent`'s step rewards with `t` in `[start, end)`, divided by the
/// window length in seconds.
pub fn average_reward_per_second(
    trace: &[MetricsRecord],
    agent: usize,
    window_start: f64,
    window_end: f64,
) -> Result<f64> {
    if !(window_end > window_start) {
        return Err(PalError::Trace(format!("empty window [{window_start}, {window_end})")));
    }
    let mut count = 0;
    let mut sum = 0.0;
    for rec in trace.iter().filter(|r| in_window(r, window_start, window_end)) {
        sum += rec.reward(agent);
        count += 1;
    }
    if count == 0 {
        return Err(PalError::Trace(format!("no records in window [{window_start}, {window_end})")));
    }
    Ok(sum / (window_end - window_start))
}

/// Start time of the first interval during which `|angle| < tolerance` holds
/// for at least `hold_duration` seconds.
pub fn detect_first_swing_up(trace: &[MetricsRecord], angle_tolerance: f64, hold_duration: f64) -> Option<f64> {
    assert!(angle_tolerance > 0.0 && hold_duration > 0.0, "tolerance and hold must be positive");
    let dt = trace_dt(trace).unwrap_or(0.0);
    let mut run_start: Option<f64> = None;
    for rec in trace {
        if wrap_angle(rec.angle).abs() < angle_tolerance {
            let start = *run_start.get_or_insert(rec.time);
            if rec.time - start + dt >= hold_duration - 1e-9 {
                return Some(start);
            }
        } else {
            run_start = None;
        }
    }
    None
}

/// Fraction of records in `[start, end)` with `|angle| < tolerance`.
pub fn upright_fraction(trace: &[MetricsRecord], tolerance: f64, start: f64, end: f64) -> f64 {
    let (mut inside, mut total) = (0usize, 0usize);
    for rec in trace.iter().filter(|r| in_window(r, start, end)) {
        total += 1;
        if wrap_angle(rec.angle).abs() < tolerance {
            inside += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

/// Critic state values at `(+probe, 0)` and `(-probe, 0)`.
pub fn value_asymmetry_report(critic: &Mlp, control_limit: f64, probe_angle: f64, resolution: f64) -> ValueAsymmetry {
    let plus = state_value_on_grid(critic, &[probe_angle, 0.0], control_limit, resolution);
    let minus = state_value_on_grid(critic, &[-probe_angle, 0.0], control_limit, resolution);
    ValueAsymmetry::new(probe_angle, plus, minus)
}

/// [`value_asymmetry_report`] for an arbitrary `q(state, u)`.
pub fn value_asymmetry_with<Q: Fn(&[f64], f64) -> f64>(
    q: Q,
    control_limit: f64,
    probe_angle: f64,
    resolution: f64,
) -> ValueAsymmetry {
    let v = |phi: f64| max_over_grid(|u| q(&[phi, 0.0], u), control_limit, resolution);
    ValueAsymmetry::new(probe_angle, v(probe_angle), v(-probe_angle))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
