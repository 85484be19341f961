//! Named-tensor container: `TNSR`, `u32` version, `u32` count, then per tensor
//! `u32` name length, UTF-8 name, `u32` rank, `u32` dims, little-endian `f32` data.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u32 = 1;

/// Ordered set of named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Appends a tensor and returns its slot index.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<S>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let named: Vec<(&str, &Tensor<S>)> = self
            .names
            .iter()
            .map(String::as_str)
            .zip(&self.tensors)
            .collect();
        save_tensors(path, &named)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (names, tensors) = load_tensors(path)?.into_iter().unzip();
        Ok(Self { names, tensors })
    }
}

pub fn save_tensors<S: Scalar>(path: impl AsRef<Path>, tensors: &[(&str, &Tensor<S>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_f32_lossy().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("tensor container truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_tensors<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor<S>)>> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad tensor container magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported tensor container version {version}")));
    }
    let count = c.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = c.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let n: usize = shape.iter().product();
        let data = c
            .take(n * 4)?
            .chunks_exact(4)
            .map(|b| S::of_f32(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after tensor container".into()));
    }
    Ok(out)
}
