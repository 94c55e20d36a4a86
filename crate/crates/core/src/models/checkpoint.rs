//! Checkpoint file: a JSON header followed by the raw parameter vector.
//!
//! ```text
//! magic     8 bytes   "HBCKPT01"
//! json_len  u64 LE
//! json      json_len bytes, UTF-8 (CheckpointMeta)
//! count     u64 LE
//! params    count x f64 LE
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec};
use crate::dataset::{EmbedConfig, ScaleParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HBCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: Model,
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    if meta.spec != *model.spec() {
        return Err(Error::InvalidArgument(
            "checkpoint metadata spec differs from the model's".into(),
        ));
    }
    let json = serde_json::to_vec(meta).map_err(|e| Error::Format {
        what: "checkpoint header",
        detail: e.to_string(),
    })?;
    let params = model.parameters();
    let mut buf = Vec::with_capacity(8 + 8 + json.len() + 8 + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(bad("truncated file"));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn take_u64(bytes: &mut &[u8]) -> Result<u64> {
    let raw = take(bytes, 8)?;
    Ok(u64::from_le_bytes(raw.try_into().expect("8 bytes")))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = data.as_slice();
    if take(&mut bytes, 8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let json_len = take_u64(&mut bytes)? as usize;
    let meta: CheckpointMeta =
        serde_json::from_slice(take(&mut bytes, json_len)?).map_err(|e| Error::Format {
            what: "checkpoint header",
            detail: e.to_string(),
        })?;
    let count = take_u64(&mut bytes)? as usize;
    let raw = take(
        &mut bytes,
        count.checked_mul(8).ok_or_else(|| bad("count overflow"))?,
    )?;
    if !bytes.is_empty() {
        return Err(bad(format!("{} trailing bytes", bytes.len())));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut model = Model::zeroed(&meta.spec)?;
    model.load_parameters(&params)?;
    Ok(Checkpoint { meta, model })
}
