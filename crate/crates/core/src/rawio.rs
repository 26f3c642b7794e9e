//! Raw little-endian array files with JSON sidecars.
//!
//! `name.c128` holds interleaved `(re, im)` float64 pairs, `name.f64` plain
//! float64 values; `name.c128.json` / `name.f64.json` record dtype, shape and
//! any per-array metadata.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex128,
    Float64,
}

impl Dtype {
    fn bytes_per_elem(self) -> usize {
        match self {
            Dtype::Complex128 => 16,
            Dtype::Float64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub byte_order: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

impl Sidecar {
    pub fn new(dtype: Dtype, shape: Vec<usize>, meta: serde_json::Value) -> Self {
        Self {
            dtype,
            shape,
            byte_order: "little".into(),
            order: "row-major".into(),
            meta,
        }
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn encode_f64(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

pub fn encode_c128(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_c128(bytes: &[u8]) -> Vec<Complex64> {
    decode_f64(bytes)
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

fn write_raw(path: &Path, bytes: &[u8], sidecar: &Sidecar) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), sidecar)
}

fn read_raw(path: &Path, dtype: Dtype) -> Result<(Vec<u8>, Sidecar)> {
    let sidecar: Sidecar = read_json(&sidecar_path(path))?;
    if sidecar.dtype != dtype {
        return Err(Error::format(
            path,
            format!("expected dtype {dtype:?}, sidecar says {:?}", sidecar.dtype),
        ));
    }
    if sidecar.byte_order != "little" {
        return Err(Error::format(path, "only little-endian arrays are supported"));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sidecar.element_count() * dtype.bytes_per_elem();
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for shape {:?}, found {}", sidecar.shape, bytes.len()),
        ));
    }
    Ok((bytes, sidecar))
}

pub fn write_c128(path: &Path, values: &[Complex64], shape: &[usize], meta: serde_json::Value) -> Result<()> {
    let sidecar = Sidecar::new(Dtype::Complex128, shape.to_vec(), meta);
    if sidecar.element_count() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "shape {shape:?} does not match {} values",
            values.len()
        )));
    }
    write_raw(path, &encode_c128(values), &sidecar)
}

pub fn read_c128(path: &Path) -> Result<(Vec<Complex64>, Sidecar)> {
    let (bytes, sidecar) = read_raw(path, Dtype::Complex128)?;
    Ok((decode_c128(&bytes), sidecar))
}

pub fn write_f64(path: &Path, values: &[f64], shape: &[usize], meta: serde_json::Value) -> Result<()> {
    let sidecar = Sidecar::new(Dtype::Float64, shape.to_vec(), meta);
    if sidecar.element_count() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "shape {shape:?} does not match {} values",
            values.len()
        )));
    }
    write_raw(path, &encode_f64(values), &sidecar)
}

pub fn read_f64(path: &Path) -> Result<(Vec<f64>, Sidecar)> {
    let (bytes, sidecar) = read_raw(path, Dtype::Float64)?;
    Ok((decode_f64(&bytes), sidecar))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn c128_roundtrip_is_bit_exact(v in prop::collection::vec((any::<f64>(), any::<f64>()), 0..64)) {
            let z: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let back = decode_c128(&encode_c128(&z));
            prop_assert_eq!(back.len(), z.len());
            for (a, b) in z.iter().zip(&back) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn file_roundtrip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.f64");
        write_f64(&p, &[1.0, -2.5, 3.0], &[3], serde_json::json!({"k": 1})).unwrap();
        let (v, sc) = read_f64(&p).unwrap();
        assert_eq!(v, vec![1.0, -2.5, 3.0]);
        assert_eq!(sc.meta["k"], 1);
        assert!(read_c128(&p).is_err());
        assert!(write_f64(&p, &[1.0], &[2], serde_json::Value::Null).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.c128");
        write_c128(&p, &[Complex64::new(1.0, 2.0); 4], &[2, 2], serde_json::Value::Null).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_c128(&p), Err(Error::Format { .. })));
    }
}
