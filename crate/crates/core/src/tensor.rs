//! Dense row-major matrices and the named-tensor container shared by weight
//! files and feature exports.
//!
//! Container layout:
//!
//! ```text
//! <MAGIC>\n
//! <key> <value...>\n          (header lines, free-form values)
//! tensor <name> <dtype> <d0>x<d1>... <byte offset>\n
//! end\n
//! <blob: little-endian row-major values>
//! ```
//!
//! Offsets are relative to the first byte after `end\n`. Supported dtypes are
//! `f64` and `f32`; values are widened to f64 in memory.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected}, found {found:?}")]
    Magic { expected: String, found: String },
    #[error("malformed container: {0}")]
    Malformed(String),
    #[error("missing tensor {0}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::default(); rows * cols] }
    }
}

impl<T: Copy> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row width");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Columns `start..start + width` as a new matrix.
    pub fn column_slice(&self, start: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Self { rows: self.rows, cols: width, data }
    }

    /// Horizontal concatenation.
    pub fn hstack(parts: &[Self]) -> Self {
        let rows = parts.first().map_or(0, |p| p.rows);
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                assert_eq!(p.rows, rows, "hstack row count");
                data.extend_from_slice(p.row(r));
            }
        }
        Self { rows, cols, data }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// An n-dimensional row-major f64 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape/data mismatch");
        Self { shape, data }
    }

    pub fn from_matrix(m: &Matrix<f64>) -> Self {
        Self::new(vec![m.rows(), m.cols()], m.data().to_vec())
    }

    pub fn to_matrix(&self) -> Option<Matrix<f64>> {
        match self.shape.as_slice() {
            [r, c] => Some(Matrix::from_vec(*r, *c, self.data.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Named tensors plus ordered header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorContainer {
    pub header: Vec<(String, String)>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self { header: Vec::new(), tensors: BTreeMap::new() }
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_header(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        assert!(!value.contains('\n') && !key.contains(char::is_whitespace), "header fields are single-line");
        match self.header.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.header.push((key.to_string(), value)),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        self.tensors.insert(name.to_string(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, ContainerError> {
        self.tensors.get(name).ok_or_else(|| ContainerError::Missing(name.to_string()))
    }

    pub fn write<W: Write>(&self, magic: &str, dtype: DType, mut out: W) -> io::Result<()> {
        writeln!(out, "{magic}")?;
        for (k, v) in &self.header {
            writeln!(out, "{k} {v}")?;
        }
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            let dims = if dims.is_empty() { "scalar".to_string() } else { dims.join("x") };
            writeln!(out, "tensor {name} {} {dims} {offset}", dtype.name())?;
            offset += t.data.len() * dtype.width();
        }
        writeln!(out, "end")?;
        for t in self.tensors.values() {
            match dtype {
                DType::F64 => {
                    for v in &t.data {
                        out.write_all(&v.to_le_bytes())?;
                    }
                }
                DType::F32 => {
                    for v in &t.data {
                        out.write_all(&(*v as f32).to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self, magic: &str, dtype: DType) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(magic, dtype, &mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses only the text manifest: header fields and `(name, dtype, shape, offset)` entries.
    pub fn read_manifest(bytes: &[u8], magic: &str) -> Result<(Manifest, usize), ContainerError> {
        let mut pos = 0usize;
        let mut next_line = || -> Result<&str, ContainerError> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| ContainerError::Malformed("unterminated manifest".into()))?;
            let line = std::str::from_utf8(&rest[..end]).map_err(|e| ContainerError::Malformed(e.to_string()))?;
            pos += end + 1;
            Ok(line)
        };
        let first = next_line().unwrap_or("");
        if first != magic {
            return Err(ContainerError::Magic { expected: magic.to_string(), found: first.chars().take(16).collect() });
        }
        let mut manifest = Manifest::default();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            if key == "tensor" {
                let parts: Vec<&str> = value.split(' ').collect();
                if parts.len() != 4 {
                    return Err(ContainerError::Malformed(format!("bad tensor line {line:?}")));
                }
                let dtype = match parts[1] {
                    "f64" => DType::F64,
                    "f32" => DType::F32,
                    other => return Err(ContainerError::Malformed(format!("unsupported dtype {other}"))),
                };
                let shape = if parts[2] == "scalar" {
                    Vec::new()
                } else {
                    parts[2]
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ContainerError::Malformed(format!("bad shape {:?}: {e}", parts[2])))?
                };
                let offset = parts[3].parse::<usize>().map_err(|e| ContainerError::Malformed(e.to_string()))?;
                manifest.entries.push(ManifestEntry { name: parts[0].to_string(), dtype, shape, offset });
            } else {
                manifest.header.push((key.to_string(), value.to_string()));
            }
        }
        Ok((manifest, pos))
    }

    pub fn from_bytes(bytes: &[u8], magic: &str) -> Result<Self, ContainerError> {
        let (manifest, blob_start) = Self::read_manifest(bytes, magic)?;
        let blob = &bytes[blob_start..];
        let mut tensors = BTreeMap::new();
        for e in manifest.entries {
            let count: usize = e.shape.iter().product();
            let len = count * e.dtype.width();
            let raw = blob
                .get(e.offset..e.offset + len)
                .ok_or_else(|| ContainerError::Malformed(format!("tensor {} runs past the blob", e.name)))?;
            let data = match e.dtype {
                DType::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
                DType::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            };
            if tensors.insert(e.name.clone(), Tensor { shape: e.shape, data }).is_some() {
                return Err(ContainerError::Malformed(format!("duplicate tensor {}", e.name)));
            }
        }
        Ok(Self { header: manifest.header, tensors })
    }

    pub fn read<R: Read>(mut input: R, magic: &str) -> Result<Self, ContainerError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, magic)
    }
}

impl Default for TensorContainer {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub header: Vec<(String, String)>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub offset: usize,
}
