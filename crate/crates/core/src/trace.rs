//! Per-step metrics and their CSV / JSON serialisation.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};

pub const TRACE_HEADER: &str = "t,phi,omega,u1,u2,r1,r2,id_loss1,id_loss2";

/// One real time step. `id_loss*` is NaN for agents without identification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub time: f64,
    pub angle: f64,
    pub angular_velocity: f64,
    pub u1: f64,
    pub u2: f64,
    pub r1: f64,
    pub r2: f64,
    pub id_loss1: f64,
    pub id_loss2: f64,
}

impl MetricsRecord {
    pub fn reward(&self, agent: usize) -> f64 {
        match agent {
            0 => self.r1,
            1 => self.r2,
            _ => panic!("two agents only"),
        }
    }

    fn fields(&self) -> [f64; 9] {
        [
            self.time,
            self.angle,
            self.angular_velocity,
            self.u1,
            self.u2,
            self.r1,
            self.r2,
            self.id_loss1,
            self.id_loss2,
        ]
    }
}

/// 17 significant digits; round-trips every f64 exactly.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn trace_to_csv(trace: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(TRACE_HEADER.len() + 1 + trace.len() * 9 * 24);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for rec in trace {
        for (i, v) in rec.fields().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, trace: &[MetricsRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(trace_to_csv(trace).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn parse_trace(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => return Err(PalError::Trace(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| PalError::Trace(format!("line {}: {e}", i + 2)))?;
            if vals.len() != 9 {
                return Err(PalError::Trace(format!("line {}: expected 9 fields, got {}", i + 2, vals.len())));
            }
            Ok(MetricsRecord {
                time: vals[0],
                angle: vals[1],
                angular_velocity: vals[2],
                u1: vals[3],
                u2: vals[4],
                r1: vals[5],
                r2: vals[6],
                id_loss1: vals[7],
                id_loss2: vals[8],
            })
        })
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<MetricsRecord>> {
    parse_trace(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueAsymmetry {
    pub probe_angle: f64,
    /// `V(+probe, 0)`.
    pub value_plus: f64,
    /// `V(-probe, 0)`.
    pub value_minus: f64,
    pub difference: f64,
}

impl ValueAsymmetry {
    pub fn new(probe_angle: f64, value_plus: f64, value_minus: f64) -> Self {
        Self { probe_angle, value_plus, value_minus, difference: value_plus - value_minus }
    }
}

/// JSON summary written next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub setup: String,
    pub seed: u64,
    pub config_hash: String,
    pub steps: usize,
    pub completed: bool,
    pub abort_reason: Option<String>,
    pub first_swing_up_time: Option<f64>,
    pub metrics_window: [f64; 2],
    /// `None` when the trace is empty.
    pub avg_reward_per_second: Option<[f64; 2]>,
    pub upright_fraction: f64,
    /// Agent 1's critic at `(+probe, 0)` and `(-probe, 0)`, when its state is the plant state.
    pub value_asymmetry: Option<ValueAsymmetry>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary is always serialisable")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| PalError::Trace(e.to_string()))
    }
}
