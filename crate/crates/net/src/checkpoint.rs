//! Self-describing checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "CFCKPT01"
//! header_len u64
//! header     header_len bytes of UTF-8 JSON (CheckpointHeader)
//! data       tensor values, row-major, dtype per header ("f32" or "f64")
//! ```
//!
//! Each tensor entry gives its name, its `[rows, cols]` shape and the offset
//! of its first element counted in elements from the start of `data`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{CompletionModel, ModelConfig};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"CFCKPT01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: u32,
    pub dtype: String,
    pub config: ModelConfig,
    pub step: u64,
    pub epoch: usize,
    pub val_loss: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

/// Training position stored alongside the weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub step: u64,
    pub epoch: usize,
    pub val_loss: Option<f64>,
}

pub fn save<T: Scalar>(path: &Path, model: &CompletionModel<T>, info: CheckpointInfo) -> Result<()> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, v) in model.params().iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: [v.nrows(), v.ncols()],
            offset,
        });
        offset += v.len();
    }
    let header = CheckpointHeader {
        format: FORMAT_VERSION,
        dtype: T::DTYPE.to_string(),
        config: model.config().clone(),
        step: info.step,
        epoch: info.epoch,
        val_loss: info.val_loss,
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let width = if T::DTYPE == "f64" { 8 } else { 4 };
    let mut buf = Vec::with_capacity(16 + json.len() + offset * width);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, v) in model.params().iter() {
        for x in v.iter() {
            if width == 8 {
                buf.extend_from_slice(&x.as_f64().to_le_bytes());
            } else {
                buf.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
            }
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| NetError::io(parent, e))?;
    }
    // Write then rename so a crash never leaves a torn checkpoint behind.
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| NetError::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| NetError::io(&tmp, e))?;
    f.sync_all().map_err(|e| NetError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| NetError::io(path, e))
}

pub fn read_header(path: &Path) -> Result<(CheckpointHeader, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| NetError::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(NetError::checkpoint(path, "not a checkpoint file (bad magic)"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| NetError::checkpoint(path, "truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..end])
        .map_err(|e| NetError::checkpoint(path, format!("bad header: {e}")))?;
    if header.format != FORMAT_VERSION {
        return Err(NetError::checkpoint(path, format!("unsupported format {}", header.format)));
    }
    Ok((header, bytes[end..].to_vec()))
}

pub fn load<T: Scalar>(path: &Path) -> Result<(CompletionModel<T>, CheckpointInfo)> {
    let (header, data) = read_header(path)?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(NetError::checkpoint(path, format!("unknown dtype {other}"))),
    };
    let mut model = CompletionModel::<T>::new(header.config.clone(), 0)
        .map_err(|e| NetError::checkpoint(path, e.to_string()))?;
    if header.tensors.len() != model.params().len() {
        return Err(NetError::checkpoint(
            path,
            format!("{} tensors, model expects {}", header.tensors.len(), model.params().len()),
        ));
    }
    for entry in &header.tensors {
        let target = model
            .params_mut()
            .by_name_mut(&entry.name)
            .ok_or_else(|| NetError::checkpoint(path, format!("unexpected tensor {}", entry.name)))?;
        if [target.nrows(), target.ncols()] != entry.shape {
            return Err(NetError::checkpoint(
                path,
                format!("tensor {} has shape {:?}, expected {:?}", entry.name, entry.shape, target.dim()),
            ));
        }
        let start = entry.offset * width;
        let end = start + target.len() * width;
        let raw = data
            .get(start..end)
            .ok_or_else(|| NetError::checkpoint(path, format!("tensor {} is truncated", entry.name)))?;
        for (dst, chunk) in target.iter_mut().zip(raw.chunks_exact(width)) {
            *dst = if width == 8 {
                T::lit(f64::from_le_bytes(chunk.try_into().unwrap()))
            } else {
                T::lit(f32::from_le_bytes(chunk.try_into().unwrap()) as f64)
            };
        }
    }
    Ok((
        model,
        CheckpointInfo {
            step: header.step,
            epoch: header.epoch,
            val_loss: header.val_loss,
        },
    ))
}
