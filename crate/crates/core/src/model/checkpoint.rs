//! Checkpoint layout: one line of JSON header, then every tensor as raw
//! little-endian `f64`s in the order the header lists them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelState, Normalization};
use crate::data::{GameId, UserId};
use crate::error::{Error, Result};
use crate::graph::RelationKind;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub dim: usize,
    pub relation_order: Vec<RelationKind>,
    pub config: ModelConfig,
    pub normalization: Normalization,
    /// Free-form training settings recorded for provenance.
    pub hyperparams: serde_json::Value,
    pub user_ids: Vec<UserId>,
    pub game_ids: Vec<GameId>,
    pub tensors: Vec<TensorEntry>,
}

impl CheckpointHeader {
    pub fn describe(
        state: &ModelState,
        config: ModelConfig,
        normalization: Normalization,
        hyperparams: serde_json::Value,
        user_ids: Vec<UserId>,
        game_ids: Vec<GameId>,
    ) -> Self {
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            dim: state.dim(),
            relation_order: RelationKind::ALL.to_vec(),
            config,
            normalization,
            hyperparams,
            user_ids,
            game_ids,
            tensors: state
                .tensors()
                .into_iter()
                .map(|(name, t)| TensorEntry { name, len: t.len() })
                .collect(),
        }
    }
}

pub fn save_checkpoint(path: &Path, state: &ModelState, header: &CheckpointHeader) -> Result<()> {
    if header.user_ids.len() != state.num_users() || header.game_ids.len() != state.num_games() {
        return Err(Error::Checkpoint("id lists do not match parameter shapes".into()));
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(io)?;
    for (_, t) in state.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, CheckpointHeader)> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(io)?;
    let header: CheckpointHeader = serde_json::from_slice(&line)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    if header.relation_order != RelationKind::ALL {
        return Err(Error::Checkpoint("unexpected relation order".into()));
    }
    let mut state = ModelState::zeros(header.user_ids.len(), header.game_ids.len(), header.dim);
    let mut buf = [0u8; 8];
    for ((name, t), entry) in state.tensors_mut().into_iter().zip(&header.tensors) {
        if name != entry.name || t.len() != entry.len {
            return Err(Error::Checkpoint(format!(
                "tensor {} (len {}) does not match expected {name} (len {})",
                entry.name,
                entry.len,
                t.len()
            )));
        }
        for v in t.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint(format!("truncated data in tensor {name}")))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok((state, header))
}
