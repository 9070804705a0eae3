//! Versioned binary checkpoint container.
//!
//! Layout (little-endian): magic `DLMTCKPT`, `u32` format version, `u32`
//! length plus canonical JSON config, `u64` step, `u8` flag plus `u64`
//! dataset seed, `u32` tensor count then per tensor a `u32` length-prefixed
//! name and the tensor record, `u8` flag plus optional Adam state, and a
//! trailing `u32` CRC-32 of everything before it.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use super::config::NetConfig;
use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::{AdamState, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DLMTCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: NetConfig,
    /// Parameters then batch-norm running estimates, in layout order.
    pub tensors: Vec<(String, Tensor)>,
    pub optimizer: Option<AdamState>,
    pub step: u64,
    pub dataset_seed: Option<u64>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, step: u64, optimizer: Option<AdamState>, dataset_seed: Option<u64>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            tensors: model.named_tensors(),
            optimizer,
            step,
            dataset_seed,
        }
    }

    /// Rebuilds the model described by the stored config.
    pub fn model(&self) -> Result<Model> {
        Model::from_named(&self.config, self.tensors.clone())
    }

    /// Rebuilds the model against a config the caller expects; any name or
    /// shape difference is a shape mismatch.
    pub fn model_for(&self, expected: &NetConfig) -> Result<Model> {
        Model::from_named(expected, self.tensors.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_body(&mut out).expect("writing to a Vec cannot fail");
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    fn write_body(&self, out: &mut Vec<u8>) -> std::io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&self.format_version.to_le_bytes())?;
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        out.write_all(&(config.len() as u32).to_le_bytes())?;
        out.write_all(&config)?;
        out.write_all(&self.step.to_le_bytes())?;
        write_opt_u64(out, self.dataset_seed)?;
        out.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            t.write_to(out)?;
        }
        match &self.optimizer {
            None => out.write_all(&[0])?,
            Some(state) => {
                out.write_all(&[1])?;
                out.write_all(&state.step.to_le_bytes())?;
                out.write_all(&(state.first.len() as u32).to_le_bytes())?;
                for t in state.first.iter().chain(&state.second) {
                    t.write_to(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
            return Err(Error::Checksum);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Checksum);
        }
        let mut r = Cursor::new(body);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Corrupt("not a checkpoint file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let config_len = read_u32(&mut r)? as usize;
        let config: NetConfig = serde_json::from_slice(&read_bytes(&mut r, config_len)?)?;
        let step = read_u64(&mut r)?;
        let dataset_seed = read_opt_u64(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            let name = String::from_utf8(read_bytes(&mut r, len)?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?;
            tensors.push((name, Tensor::read_from(&mut r)?));
        }
        let optimizer = match read_u8(&mut r)? {
            0 => None,
            1 => {
                let step = read_u64(&mut r)?;
                let n = read_u32(&mut r)? as usize;
                let mut all = (0..2 * n).map(|_| Tensor::read_from(&mut r)).collect::<Result<Vec<_>>>()?;
                let second = all.split_off(n);
                Some(AdamState { step, first: all, second })
            }
            flag => return Err(Error::Corrupt(format!("optimizer flag {flag}"))),
        };
        if r.position() as usize != body.len() {
            return Err(Error::Corrupt("trailing bytes after checkpoint body".into()));
        }
        let ckpt = Self {
            format_version: version,
            config,
            tensors,
            optimizer,
            step,
            dataset_seed,
        };
        ckpt.model()?;
        if let Some(state) = &ckpt.optimizer {
            let params = crate::net::model::param_layout(&ckpt.config);
            let ok = state.first.len() == params.len()
                && state
                    .first
                    .iter()
                    .zip(&state.second)
                    .zip(&params)
                    .all(|((m, v), p)| m.shape() == p.shape.as_slice() && v.shape() == p.shape.as_slice());
            if !ok {
                return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
            }
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::at(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::at(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn write_opt_u64(out: &mut Vec<u8>, v: Option<u64>) -> std::io::Result<()> {
    match v {
        None => out.write_all(&[0; 9]),
        Some(v) => {
            out.write_all(&[1])?;
            out.write_all(&v.to_le_bytes())
        }
    }
}

fn read_bytes(r: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_opt_u64(r: &mut impl Read) -> Result<Option<u64>> {
    let flag = read_u8(r)?;
    let v = read_u64(r)?;
    match flag {
        0 => Ok(None),
        1 => Ok(Some(v)),
        f => Err(Error::Corrupt(format!("option flag {f}"))),
    }
}
