//! `CODES-CKPT v1`: magic `CODESCK1`, `u64` LE header length, JSON header,
//! then the flattened parameters as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MlpSpec;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CODESCK1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub name: String,
    /// Network shape; `None` for raw parameter blocks such as polynomial coefficients.
    pub spec: Option<MlpSpec>,
    pub shape: Vec<usize>,
    pub seed: u64,
    pub epoch: usize,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(name: &str, spec: Option<MlpSpec>, shape: Vec<usize>, seed: u64, epoch: usize, params: Vec<f64>) -> Self {
        Self {
            header: CheckpointHeader {
                format: "CODES-CKPT".into(),
                version: 1,
                name: name.into(),
                spec,
                shape,
                seed,
                epoch,
                n_params: params.len(),
            },
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.header.n_params != self.params.len() {
            return Err(Error::Invariant("checkpoint header n_params disagrees with payload".into()));
        }
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("checkpoint shorter than fixed prefix".into()));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                expected: "CODESCK1",
                found: bytes[..8].to_vec(),
            });
        }
        let h = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let end = usize::try_from(h)
            .ok()
            .and_then(|h| h.checked_add(16))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("checkpoint header length exceeds file".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[16..end]).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        if header.format != "CODES-CKPT" || header.version != 1 {
            return Err(Error::Format(format!("unsupported checkpoint {} v{}", header.format, header.version)));
        }
        let payload = &bytes[end..];
        if payload.len() != header.n_params * 8 {
            return Err(Error::Format(format!(
                "checkpoint payload is {} bytes, header implies {}",
                payload.len(),
                header.n_params * 8
            )));
        }
        if let Some(spec) = &header.spec {
            if spec.param_count() != header.n_params {
                return Err(Error::Format("checkpoint spec disagrees with n_params".into()));
            }
        }
        let params = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { header, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
