//! Checkpoint file:
//!
//! ```text
//! b"PPNG1\n"                     magic
//! u64 little-endian              header length in bytes
//! UTF-8 JSON header              CheckpointMeta
//! f32 little-endian * count      parameters, layer by layer, weights row-major then biases
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::{param_count, QFunction};
use crate::court::{ObsMode, Side};
use crate::personas::Personality;

pub const MAGIC: &[u8; 6] = b"PPNG1\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub personality: Personality,
    pub side: Side,
    pub obs_mode: ObsMode,
    pub layer_sizes: Vec<usize>,
    pub frames_trained: u64,
    pub seed: u64,
    pub created_utc: String,
}

impl CheckpointMeta {
    /// Conventional agent name, e.g. `ID_L`.
    pub fn agent_name(&self) -> String {
        format!("{}_{}", self.personality.tag(), self.side.letter())
    }
}

/// Creation timestamp; honours `SOURCE_DATE_EPOCH` so that reruns can
/// produce byte-identical files.
pub fn timestamp_utc() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok());
    let when = match secs {
        Some(s) => chrono::DateTime::from_timestamp(s, 0).unwrap_or_default(),
        None => chrono::Utc::now(),
    };
    when.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub qf: QFunction<f32>,
}

impl Checkpoint {
    /// Checks that this checkpoint may drive `side` with `obs_mode` inputs.
    /// A checkpoint trained on the other side is only accepted with `mirror`.
    pub fn check_use(
        &self,
        side: Side,
        mirror: bool,
        obs_mode: ObsMode,
    ) -> Result<(), CheckpointError> {
        if self.meta.side != side && !mirror {
            return Err(CheckpointError::Incompatible(format!(
                "{} was trained on the {} side; driving the {side} paddle requires the mirror flag",
                self.meta.agent_name(),
                self.meta.side
            )));
        }
        if self.meta.obs_mode != obs_mode {
            return Err(CheckpointError::Incompatible(format!(
                "checkpoint expects {} observations, got {obs_mode}",
                self.meta.obs_mode
            )));
        }
        if self.qf.input_len() != obs_mode.input_len() {
            return Err(CheckpointError::Incompatible(format!(
                "input layer {} does not match {obs_mode} observation length {}",
                self.qf.input_len(),
                obs_mode.input_len()
            )));
        }
        Ok(())
    }
}

pub fn encode_checkpoint(qf: &QFunction<f32>, meta: &CheckpointMeta) -> Vec<u8> {
    let header = serde_json::to_vec(meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + 4 * qf.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in qf.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let bad = |m: &str| CheckpointError::Incompatible(m.to_string());
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let mut len = [0u8; 8];
    len.copy_from_slice(&bytes[6..14]);
    let header_len = u64::from_le_bytes(len) as usize;
    let rest = &bytes[14..];
    if rest.len() < header_len {
        return Err(bad("truncated header"));
    }
    let meta: CheckpointMeta = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| CheckpointError::Incompatible(format!("bad header: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Incompatible(format!(
            "unsupported format version {}",
            meta.format_version
        )));
    }
    let body = &rest[header_len..];
    let count = param_count(&meta.layer_sizes);
    if body.len() != 4 * count {
        return Err(CheckpointError::Incompatible(format!(
            "parameter block is {} bytes, layer sizes {:?} need {}",
            body.len(),
            meta.layer_sizes,
            4 * count
        )));
    }
    let params = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let qf = QFunction::from_params(&meta.layer_sizes, params)
        .map_err(|e| CheckpointError::Incompatible(e.to_string()))?;
    Ok(Checkpoint { meta, qf })
}

pub fn save_checkpoint(
    path: &Path,
    qf: &QFunction<f32>,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    if meta.layer_sizes != qf.sizes() {
        return Err(CheckpointError::Incompatible(
            "metadata layer sizes differ from the network".into(),
        ));
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&encode_checkpoint(qf, meta)).map_err(io)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
