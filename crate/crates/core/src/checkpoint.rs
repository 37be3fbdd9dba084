//! Parameter checkpoints.
//!
//! Layout of `checkpoint.bin`, all integers little-endian:
//!
//! ```text
//! b"SAGECKPT"            8-byte magic
//! u32                    file format version (1)
//! u32                    header length H
//! H bytes                UTF-8 JSON CheckpointHeader
//! f64 x parameter_count  parameters in flattening order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::nn::{NetworkSpec, ParameterVector, LAYOUT_VERSION};

const MAGIC: &[u8; 8] = b"SAGECKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub network: NetworkSpec,
    pub seed: u64,
    pub layout_version: u32,
    pub parameter_count: usize,
}

pub fn encode(network: &NetworkSpec, seed: u64, params: &ParameterVector) -> Result<Vec<u8>> {
    if params.len() != network.parameter_count() {
        return Err(SageError::config(format!(
            "checkpoint of {} parameters for a network with {}",
            params.len(),
            network.parameter_count()
        )));
    }
    let header = CheckpointHeader {
        network: network.clone(),
        seed,
        layout_version: LAYOUT_VERSION,
        parameter_count: params.len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, ParameterVector)> {
    let bad = |m: &str| SageError::config(format!("malformed checkpoint: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| bad(&format!("header: {e}")))?;
    if header.layout_version != LAYOUT_VERSION {
        return Err(bad(&format!(
            "layout version {} is not {LAYOUT_VERSION}",
            header.layout_version
        )));
    }
    header.network.validate()?;
    if header.parameter_count != header.network.parameter_count() {
        return Err(bad("parameter count disagrees with network"));
    }
    let data = &bytes[16 + hlen..];
    if data.len() != 8 * header.parameter_count {
        return Err(bad(&format!(
            "expected {} parameter bytes, found {}",
            8 * header.parameter_count,
            data.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, ParameterVector(values)))
}

pub fn save(
    path: impl AsRef<Path>,
    network: &NetworkSpec,
    seed: u64,
    params: &ParameterVector,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(network, seed, params)?).map_err(|e| SageError::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ParameterVector)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SageError::io(path, e))?;
    decode(&bytes)
}
