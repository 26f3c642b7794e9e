//! Checkpoint file: `R2D2CKPT`, `u32` version, `u64` header length, JSON
//! header, then each tensor's raw little-endian bytes in header order.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::arch::{build, ArchConfig, Network};
use super::{ParamStore, ParamTensor, Real};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"R2D2CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ArchConfig,
    dtype: String,
    receptive_field: usize,
    parameter_count: usize,
    tensors: Vec<ParamTensor<f64>>,
    meta: serde_json::Value,
}

pub fn save<T: Real>(path: &Path, net: &Network<T>, meta: serde_json::Value) -> Result<()> {
    if let Some(name) = net.params.first_non_finite() {
        return Err(Error::NonFinite(format!("parameter `{name}` at checkpoint")));
    }
    let header = Header {
        config: net.config.clone(),
        dtype: T::DTYPE.to_string(),
        receptive_field: net.receptive_field(),
        parameter_count: net.parameter_count(),
        tensors: net
            .params
            .tensors
            .iter()
            .map(|t| ParamTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: Vec::new(),
            })
            .collect(),
        meta,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
    let mut buf = Vec::with_capacity(json.len() + net.parameter_count() * std::mem::size_of::<T>() + 20);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in &net.params.tensors {
        buf.extend_from_slice(&T::to_le_bytes_vec(&t.data));
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Load a checkpoint written with either precision and convert to `T`.
pub fn load<T: Real>(path: &Path) -> Result<(Network<T>, serde_json::Value)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..20 + hlen).ok_or_else(|| Error::format(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| Error::json(path, e))?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(Error::format(path, format!("unknown dtype `{other}`"))),
    };
    let mut net: Network<T> = build(&header.config, 0)?;
    let mut offset = 20 + hlen;
    let mut params = ParamStore::default();
    for t in &header.tensors {
        let n: usize = t.shape.iter().product();
        let raw = bytes
            .get(offset..offset + n * width)
            .ok_or_else(|| Error::format(path, format!("truncated tensor `{}`", t.name)))?;
        offset += n * width;
        let data: Vec<T> = if header.dtype == T::DTYPE {
            T::from_le_bytes_slice(raw)
        } else if width == 4 {
            f32::from_le_bytes_slice(raw).into_iter().map(|v| T::from_f64(v as f64)).collect()
        } else {
            f64::from_le_bytes_slice(raw).into_iter().map(T::from_f64).collect()
        };
        params.tensors.push(ParamTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            data,
        });
    }
    if offset != bytes.len() {
        return Err(Error::format(path, "trailing bytes after tensors"));
    }
    if let Some(name) = params.first_non_finite() {
        return Err(Error::format(path, format!("tensor `{name}` holds non-finite values")));
    }
    net.load_params(params).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((net, header.meta))
}
