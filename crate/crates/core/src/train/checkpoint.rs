//! Checkpoint container, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "INFRCKPT"
//! 8       4     format version (u32)
//! 12      8     manifest length M in bytes (u64)
//! 20      M     manifest, UTF-8 JSON
//! 20+M    8*N   parameter payload, N f64 values
//! ```
//!
//! The manifest carries the model variant and configuration, a parameter
//! directory (name, shape, offset and length in f64 units), the training
//! normalization statistics, provenance and the SHA-256 of the payload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelVariant};
use crate::nn::Parameterized;

pub const MAGIC: &[u8; 8] = b"INFRCKPT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub seed: u64,
    /// Epoch whose parameters were kept.
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub variant: ModelVariant,
    pub config: ModelConfig,
    pub params: Vec<ParamEntry>,
    pub norm_stats: NormStats,
    pub provenance: Provenance,
    pub payload_len: usize,
    pub payload_sha256: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub norm_stats: NormStats,
    pub provenance: Provenance,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes `model` into the checkpoint byte layout.
pub fn encode_checkpoint(model: &Model, stats: &NormStats, provenance: &Provenance) -> Result<Vec<u8>> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    let mut offset = 0;
    for (name, t) in model.named_params() {
        let data = t.data();
        entries.push(ParamEntry { name, shape: t.shape().to_vec(), offset, len: data.len() });
        offset += data.len();
        for v in data.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        variant: model.variant,
        config: model.config.clone(),
        params: entries,
        norm_stats: stats.clone(),
        provenance: provenance.clone(),
        payload_len: offset,
        payload_sha256: hex(&Sha256::digest(&payload)),
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Parses and validates checkpoint bytes; never returns a partial model.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let integrity = |m: &str| Error::Integrity(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(integrity("not a checkpoint file (bad magic or truncated header)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Migration { found: version, expected: FORMAT_VERSION });
    }
    let mlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() < mlen {
        return Err(integrity("truncated manifest"));
    }
    let manifest: CheckpointManifest =
        serde_json::from_slice(&body[..mlen]).map_err(|e| Error::Integrity(format!("manifest: {e}")))?;
    let payload = &body[mlen..];
    if payload.len() != manifest.payload_len * 8 {
        return Err(Error::Integrity(format!(
            "payload holds {} bytes, manifest declares {} values",
            payload.len(),
            manifest.payload_len
        )));
    }
    if hex(&Sha256::digest(payload)) != manifest.payload_sha256 {
        return Err(integrity("payload checksum mismatch"));
    }

    let model = Model::new(manifest.variant, &manifest.config, 0)
        .map_err(|e| Error::Integrity(format!("embedded config: {e}")))?;
    let params = model.named_params();
    if params.len() != manifest.params.len() {
        return Err(Error::Integrity(format!(
            "checkpoint lists {} tensors, configuration builds {}",
            manifest.params.len(),
            params.len()
        )));
    }
    for ((name, t), entry) in params.iter().zip(&manifest.params) {
        if *name != entry.name || t.shape() != entry.shape.as_slice() || entry.len != t.numel() {
            return Err(Error::Integrity(format!(
                "parameter `{}` {:?} does not match `{name}` {:?}",
                entry.name,
                entry.shape,
                t.shape()
            )));
        }
        if entry.offset + entry.len > manifest.payload_len {
            return Err(Error::Integrity(format!("parameter `{name}` overruns the payload")));
        }
    }
    for ((_, t), entry) in params.iter().zip(&manifest.params) {
        let raw = &payload[entry.offset * 8..(entry.offset + entry.len) * 8];
        let mut data = t.data_mut();
        for (d, chunk) in data.iter_mut().zip(raw.chunks_exact(8)) {
            *d = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    Ok(Checkpoint { model, norm_stats: manifest.norm_stats, provenance: manifest.provenance })
}

/// Writes to a temporary sibling and renames it into place.
pub fn save_checkpoint(model: &Model, stats: &NormStats, provenance: &Provenance, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, stats, provenance)?;
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
