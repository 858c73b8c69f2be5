//! Binary model files.
//!
//! ```text
//! magic        8 bytes  "SQSIMMDL"
//! version      u32
//! config_len   u32, then config_len bytes of JSON (ModelConfig)
//! n_tensors    u32
//! per tensor:  name_len u32, name (UTF-8), ndim u32, ndim × u64 extents,
//!              product(extents) × f64
//! checksum     32 bytes, SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ModelConfig, SiameseModel};
use crate::nncore::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SQSIMMDL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct SaveSummary {
    pub param_count: usize,
    pub tensors: usize,
    pub bytes: usize,
}

fn encode(model: &SiameseModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + model.num_params() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (_, name, t) in model.params().iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Writes `model` to `path` and reports its size.
pub fn save_params(model: &SiameseModel, path: impl AsRef<Path>) -> Result<SaveSummary> {
    let path = path.as_ref();
    let bytes = encode(model);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    log::info!("saved {} parameters to {}", model.num_params(), path.display());
    Ok(SaveSummary {
        param_count: model.num_params(),
        tensors: model.params().len(),
        bytes: bytes.len(),
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::ModelFormat(format!("file truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a model file produced by [`save_params`].
pub fn decode(bytes: &[u8]) -> Result<SiameseModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::ModelFormat("not a model file (bad magic bytes)".into()));
    }
    let body_len = bytes
        .len()
        .checked_sub(32)
        .ok_or_else(|| Error::ModelFormat("file truncated".into()))?;
    let mut cur = Cursor {
        buf: &bytes[..body_len.max(MAGIC.len())],
        pos: MAGIC.len(),
    };
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config_len = cur.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(cur.take(config_len)?)
        .map_err(|e| Error::ModelFormat(format!("config block: {e}")))?;
    let mut model = SiameseModel::zeros(config)?;

    let n = cur.u32()? as usize;
    if n != model.params().len() {
        return Err(Error::ModelFormat(format!(
            "file has {n} tensors, configuration needs {}",
            model.params().len()
        )));
    }
    let mut seen = vec![false; n];
    for _ in 0..n {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::ModelFormat("tensor name is not UTF-8".into()))?
            .to_owned();
        let ndim = cur.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| cur.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let id = model
            .params()
            .find(&name)
            .ok_or_else(|| Error::ModelFormat(format!("unexpected tensor {name:?}")))?;
        if seen[id.index()] {
            return Err(Error::ModelFormat(format!("tensor {name:?} stored twice")));
        }
        seen[id.index()] = true;
        let expected = model.params().get(id).shape().to_vec();
        if shape != expected {
            return Err(Error::ModelFormat(format!(
                "tensor {name:?} has shape {shape:?}, configuration needs {expected:?}"
            )));
        }
        let count: usize = shape.iter().product();
        let raw = cur.take(count * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *model.params_mut().get_mut(id) = Tensor::new(shape, data)?;
    }
    if cur.pos != body_len {
        return Err(Error::ModelFormat("unexpected bytes after the last tensor".into()));
    }
    let digest = Sha256::digest(&bytes[..body_len]);
    if digest.as_slice() != &bytes[body_len..] {
        return Err(Error::ModelFormat("checksum mismatch (file corrupted)".into()));
    }
    if !model.params().iter().all(|(_, _, t)| t.all_finite()) {
        return Err(Error::NonFinite("model parameters".into()));
    }
    Ok(model)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<SiameseModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
