//! Binary checkpoint format.
//!
//! ```text
//! "FKDM"  u32 version  u32 tensor_count
//! per tensor: u32 name_len, name (utf-8), u32 rank, rank x u32 dims,
//!             prod(dims) x f32 values
//! u32 metadata_len, metadata (utf-8 JSON)
//! ```
//!
//! Integers and floats are little-endian; values are row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkSpec, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FKDM";
pub const VERSION: u32 = 1;

/// Rank limit; real checkpoints never exceed 3.
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMetadata {
    pub spec: NetworkSpec,
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub epoch: Option<usize>,
    #[serde(default)]
    pub val_accuracy: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor<f32>>,
    pub metadata: CheckpointMetadata,
}

impl Checkpoint {
    pub fn from_network(net: &Network<f32>, metadata: CheckpointMetadata) -> Self {
        Self {
            tensors: net.tensors().to_vec(),
            metadata: CheckpointMetadata {
                spec: net.spec().clone(),
                ..metadata
            },
        }
    }

    pub fn to_network(&self) -> Result<Network<f32>> {
        Network::from_tensors(&self.metadata.spec, self.tensors.clone())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.tensors.len() as u32);
        for t in &self.tensors {
            put_u32(&mut out, t.name.len() as u32);
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.shape.len() as u32);
            for &d in &t.shape {
                put_u32(&mut out, d as u32);
            }
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let meta = serde_json::to_vec(&self.metadata).expect("metadata serializes");
        put_u32(&mut out, meta.len() as u32);
        out.extend_from_slice(&meta);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let count = r.u32()? as usize;
        // every tensor needs at least its two length fields
        if count > r.remaining() / 8 {
            return Err(Error::Checkpoint(format!(
                "tensor count {count} exceeds file size"
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            if rank > MAX_RANK {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has rank {rank}"
                )));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= r.remaining() / 4)
                .ok_or_else(|| Error::Checkpoint(format!("tensor '{name}' is truncated")))?;
            let values = r
                .take(n * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect();
            tensors.push(Tensor {
                name,
                shape,
                values,
            });
        }
        let meta_len = r.u32()? as usize;
        let metadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        Ok(Self { tensors, metadata })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}
