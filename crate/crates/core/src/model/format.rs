//! `.ucm` model container.
//!
//! Layout: 4-byte magic `UCM\0`, little-endian `u64` header length, UTF-8
//! JSON header, then the raw little-endian tensor blob. The header carries
//! the format version, a model kind tag, kind-specific metadata and a tensor
//! table of `(name, shape, dtype, offset, nbytes)` with offsets relative to
//! the blob start.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: [u8; 4] = *b"UCM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    I8,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::I8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub offset: usize,
    pub nbytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8(Vec<i8>),
}

impl TensorData {
    fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::I8(_) => DType::I8,
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I8(v) => v.len(),
        }
    }
}

/// Collects tensors and metadata, then renders the container bytes.
#[derive(Debug)]
pub struct Writer {
    kind: String,
    meta: serde_json::Value,
    entries: Vec<TensorEntry>,
    blob: Vec<u8>,
}

impl Writer {
    pub fn new(kind: &str, meta: &impl Serialize) -> Result<Self> {
        Ok(Self { kind: kind.into(), meta: serde_json::to_value(meta)?, entries: Vec::new(), blob: Vec::new() })
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: TensorData) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::TensorInconsistent {
                name,
                detail: format!("shape {shape:?} vs {} values", data.len()),
            });
        }
        let offset = self.blob.len();
        match &data {
            TensorData::F32(v) => v.iter().for_each(|x| self.blob.extend_from_slice(&x.to_le_bytes())),
            TensorData::I8(v) => self.blob.extend(v.iter().map(|&x| x as u8)),
        }
        self.entries.push(TensorEntry {
            name,
            shape: shape.to_vec(),
            dtype: data.dtype(),
            offset,
            nbytes: self.blob.len() - offset,
        });
        Ok(())
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, t: &Tensor<f32>) -> Result<()> {
        self.push(name, t.shape(), TensorData::F32(t.data().to_vec()))
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        let header = Header { format_version: FORMAT_VERSION, kind: self.kind, meta: self.meta, tensors: self.entries };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + self.blob.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&self.blob);
        Ok(out)
    }
}

/// A parsed, validated container.
#[derive(Clone, Debug)]
pub struct Container {
    pub header: Header,
    blob: Vec<u8>,
    index: BTreeMap<String, usize>,
}

impl Container {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Truncated(format!("{} bytes is shorter than the fixed preamble", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Header("missing UCM magic; not a model file".into()));
        }
        let hlen = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let body = &bytes[12..];
        if hlen > body.len() {
            return Err(Error::Truncated(format!("header declares {hlen} bytes, {} available", body.len())));
        }
        // peek at the version before the strict parse so a future layout reports cleanly
        let loose: serde_json::Value =
            serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Header(format!("header is not JSON: {e}")))?;
        let found = loose.get("format_version").and_then(|v| v.as_u64());
        if found != Some(FORMAT_VERSION as u64) {
            return Err(Error::FormatVersion {
                found: found.map_or_else(|| "missing".into(), |v| v.to_string()),
                expected: FORMAT_VERSION,
            });
        }
        let header: Header = serde_json::from_value(loose).map_err(|e| Error::Header(e.to_string()))?;
        let blob = body[hlen..].to_vec();
        let mut index = BTreeMap::new();
        let mut cursor = 0;
        for (i, t) in header.tensors.iter().enumerate() {
            let inconsistent = |detail: String| Error::TensorInconsistent { name: t.name.clone(), detail };
            let expect = t.shape.iter().product::<usize>() * t.dtype.size();
            if t.nbytes != expect {
                return Err(inconsistent(format!(
                    "shape {:?} of {:?} needs {expect} bytes, table says {}",
                    t.shape, t.dtype, t.nbytes
                )));
            }
            if t.offset != cursor {
                return Err(inconsistent(format!("offset {} but previous tensor ends at {cursor}", t.offset)));
            }
            cursor += t.nbytes;
            if index.insert(t.name.clone(), i).is_some() {
                return Err(inconsistent("duplicate tensor name".into()));
            }
        }
        if cursor > blob.len() {
            return Err(Error::Truncated(format!("tensor table spans {cursor} bytes, blob holds {}", blob.len())));
        }
        if cursor < blob.len() {
            return Err(Error::Header(format!("{} trailing bytes after the last tensor", blob.len() - cursor)));
        }
        Ok(Self { header, blob, index })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes)
    }

    pub fn kind(&self) -> &str {
        &self.header.kind
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::KindMismatch { expected: kind.into(), found: self.header.kind.clone() });
        }
        Ok(())
    }

    pub fn meta<M: DeserializeOwned>(&self) -> Result<M> {
        serde_json::from_value(self.header.meta.clone()).map_err(|e| Error::Header(format!("metadata: {e}")))
    }

    fn entry(&self, name: &str, dtype: DType, shape: &[usize]) -> Result<&TensorEntry> {
        let &i = self.index.get(name).ok_or_else(|| Error::TensorInconsistent {
            name: name.into(),
            detail: "missing from tensor table".into(),
        })?;
        let t = &self.header.tensors[i];
        if t.dtype != dtype || t.shape != shape {
            return Err(Error::TensorInconsistent {
                name: name.into(),
                detail: format!("stored {:?} {:?}, model expects {dtype:?} {shape:?}", t.dtype, t.shape),
            });
        }
        Ok(t)
    }

    pub fn f32(&self, name: &str, shape: &[usize]) -> Result<Tensor<f32>> {
        let t = self.entry(name, DType::F32, shape)?;
        let data = self.blob[t.offset..t.offset + t.nbytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Tensor::from_vec(shape, data)
    }

    pub fn i8(&self, name: &str, shape: &[usize]) -> Result<Vec<i8>> {
        let t = self.entry(name, DType::I8, shape)?;
        Ok(self.blob[t.offset..t.offset + t.nbytes].iter().map(|&b| b as i8).collect())
    }

    /// Fails unless every stored tensor was consumed by a loader.
    pub fn ensure_names(&self, used: &[String]) -> Result<()> {
        if let Some(extra) = self.index.keys().find(|k| !used.contains(k)) {
            return Err(Error::TensorInconsistent { name: extra.clone(), detail: "not part of this model".into() });
        }
        Ok(())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
