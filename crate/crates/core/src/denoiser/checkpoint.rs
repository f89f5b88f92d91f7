//! Binary checkpoint: magic, version, JSON header, little-endian f64 payload,
//! SHA-256 of everything before it.

use super::{ModelConfig, Parameters};
use crate::encodings::EncodingConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SYMFLOW\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    encoding: EncodingConfig,
    num_params: usize,
}

pub fn save_checkpoint(
    path: &Path,
    params: &Parameters,
    config: &ModelConfig,
    encoding: &EncodingConfig,
) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        model: config.clone(),
        encoding: encoding.clone(),
        num_params: params.len(),
    })?;
    let mut buf = Vec::with_capacity(64 + header.len() + 8 * params.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in &params.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn take<'a>(buf: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Checkpoint(format!("truncated while reading {what}")));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

/// Loads a checkpoint. When `expected` is given the stored model config must
/// match it.
pub fn load_checkpoint(
    path: &Path,
    expected: Option<&ModelConfig>,
) -> Result<(Parameters, ModelConfig, EncodingConfig)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 32 {
        return Err(Error::Checkpoint("file is too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let mut cur = body;
    if take(&mut cur, 8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(&mut cur, 4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(take(&mut cur, 8, "header length")?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(&mut cur, hlen, "header")?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if cur.len() != 8 * header.num_params {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header promises {} parameters",
            cur.len(),
            header.num_params
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    if let Some(want) = expected {
        if *want != header.model {
            return Err(Error::Config(format!(
                "checkpoint model {:?} does not match requested {want:?}",
                header.model
            )));
        }
    }
    header.model.validate()?;
    let values = cur.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let params = Parameters::from_values(&header.model, values)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((params, header.model, header.encoding))
}
