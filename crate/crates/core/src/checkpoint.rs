//! Binary checkpoints for networks and DDPG agents.
//!
//! Network blob (all integers and floats little-endian):
//!
//! ```text
//! 0..8    magic  b"PALMLP\0\0"
//! 8..12   format version (u32) = 1
//! 12..16  number of layer sizes L (u32)
//! ...     L layer sizes (u64)
//! ...     per layer: weights row-major (out x in, f64), then biases (f64)
//! ```
//!
//! Agent bundle:
//!
//! ```text
//! 0..8    magic  b"PALDDPG\0"
//! 8..12   format version (u32) = 1
//! 12..16  section count S (u32)
//! 16..24  control limit (f64)
//! ...     S section entries: name [u8; 8], offset (u64), length (u64)
//! ...     section payloads, each a network blob
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::ddpg::{DdpgAgent, DdpgConfig};
use crate::error::{PalError, Result};
use crate::nn::Mlp;

pub const MLP_MAGIC: &[u8; 8] = b"PALMLP\0\0";
pub const AGENT_MAGIC: &[u8; 8] = b"PALDDPG\0";
pub const FORMAT_VERSION: u32 = 1;

const SECTIONS: [&[u8; 8]; 4] = [b"actor\0\0\0", b"critic\0\0", b"tactor\0\0", b"tcritic\0"];

pub fn encode_mlp(mlp: &Mlp) -> Vec<u8> {
    let sizes = mlp.layer_sizes();
    let mut out = Vec::with_capacity(16 + 8 * sizes.len() + 8 * mlp.num_params());
    out.extend_from_slice(MLP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for (w, b) in mlp.weights().iter().zip(mlp.biases()) {
        for v in w.iter().chain(b.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_mlp(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MLP_MAGIC)?;
    r.expect_version()?;
    let n = r.u32()? as usize;
    if n < 2 {
        return Err(PalError::Checkpoint(format!("network with {n} layer sizes")));
    }
    let sizes = (0..n).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(n - 1);
    let mut biases = Vec::with_capacity(n - 1);
    for l in 0..n - 1 {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let count = fan_in
            .checked_mul(fan_out)
            .filter(|c| *c <= r.remaining() / 8)
            .ok_or_else(|| PalError::Checkpoint("layer larger than the blob".into()))?;
        let w = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let b = (0..fan_out).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        weights.push(Array2::from_shape_vec((fan_out, fan_in), w).expect("length checked"));
        biases.push(Array1::from(b));
    }
    if r.remaining() != 0 {
        return Err(PalError::Checkpoint(format!("{} trailing bytes", r.remaining())));
    }
    Mlp::from_parts(weights, biases).map_err(|e| PalError::Checkpoint(e.to_string()))
}

pub fn encode_agent(agent: &DdpgAgent) -> Vec<u8> {
    let blobs = [
        encode_mlp(agent.actor()),
        encode_mlp(agent.critic()),
        encode_mlp(agent.target_actor()),
        encode_mlp(agent.target_critic()),
    ];
    let header_len = 24 + SECTIONS.len() * 24;
    let mut out = Vec::new();
    out.extend_from_slice(AGENT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(SECTIONS.len() as u32).to_le_bytes());
    out.extend_from_slice(&agent.control_limit().to_le_bytes());
    let mut offset = header_len as u64;
    for (name, blob) in SECTIONS.iter().zip(&blobs) {
        out.extend_from_slice(*name);
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        offset += blob.len() as u64;
    }
    for blob in &blobs {
        out.extend_from_slice(blob);
    }
    out
}

/// Networks and control limit of a saved agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub control_limit: f64,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
}

impl AgentCheckpoint {
    /// Rebuilds an agent (empty replay buffer, fresh optimizers).
    pub fn into_agent(self, config: DdpgConfig) -> Result<DdpgAgent> {
        let mut agent = DdpgAgent::from_networks(self.actor, self.critic, self.control_limit, config)?;
        agent.set_targets(self.target_actor, self.target_critic)?;
        Ok(agent)
    }
}

pub fn decode_agent(bytes: &[u8]) -> Result<AgentCheckpoint> {
    let mut r = Reader::new(bytes);
    r.expect_magic(AGENT_MAGIC)?;
    r.expect_version()?;
    let count = r.u32()? as usize;
    let control_limit = r.f64()?;
    let mut found: [Option<Mlp>; 4] = Default::default();
    for _ in 0..count {
        let name = r.take(8)?;
        let offset = r.u64()? as usize;
        let len = r.u64()? as usize;
        let end = offset
            .checked_add(len)
            .filter(|e| *e <= bytes.len())
            .ok_or_else(|| PalError::Checkpoint("section out of bounds".into()))?;
        if let Some(slot) = SECTIONS.iter().position(|s| s.as_slice() == name) {
            found[slot] = Some(decode_mlp(&bytes[offset..end])?);
        }
    }
    let [actor, critic, target_actor, target_critic] =
        found.map(|m| m.ok_or_else(|| PalError::Checkpoint("missing section".into())));
    Ok(AgentCheckpoint {
        control_limit,
        actor: actor?,
        critic: critic?,
        target_actor: target_actor?,
        target_critic: target_critic?,
    })
}

pub fn save_mlp(path: &Path, mlp: &Mlp) -> Result<()> {
    fs::write(path, encode_mlp(mlp))?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    decode_mlp(&fs::read(path)?)
}

pub fn save_agent(path: &Path, agent: &DdpgAgent) -> Result<()> {
    fs::write(path, encode_agent(agent))?;
    Ok(())
}

pub fn load_agent(path: &Path) -> Result<AgentCheckpoint> {
    decode_agent(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(PalError::Checkpoint("unexpected end of data".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn expect_magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(PalError::Checkpoint("bad magic".into()));
        }
        Ok(())
    }

    fn expect_version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(PalError::Checkpoint(format!("unsupported format version {v}")));
        }
        Ok(())
    }
}
