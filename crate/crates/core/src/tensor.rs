//! Raw little-endian tensor blobs described by JSON descriptors.
//!
//! Every on-disk artifact in this crate uses the same container: a JSON
//! document carrying [`TensorDescriptor`]s, each pointing at a headerless
//! row-major blob next to it. Paths in descriptors are relative to the JSON
//! document's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
    U8,
    U16,
    U32,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 | DType::U32 => 4,
            DType::F64 => 8,
        }
    }
}

impl std::fmt::Display for DType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::U8 => "u8",
            DType::U16 => "u16",
            DType::U32 => "u32",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    RowMajor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDescriptor {
    pub path: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub layout: Layout,
}

impl TensorDescriptor {
    pub fn new(path: impl Into<String>, dtype: DType, shape: Vec<usize>) -> Self {
        Self {
            path: path.into(),
            dtype,
            shape,
            layout: Layout::RowMajor,
        }
    }

    /// Number of elements, or `None` if the shape product overflows.
    pub fn num_elements(&self) -> Option<usize> {
        element_count(&self.shape)
    }

    pub fn resolve(&self, base_dir: &Path) -> PathBuf {
        base_dir.join(&self.path)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("expected dtype {expected}, found {found}")]
    DType { expected: DType, found: DType },
    #[error("blob holds {found} bytes, shape requires {expected}")]
    ByteLength { expected: usize, found: usize },
    #[error("shape {0:?} overflows the addressable element count")]
    ShapeOverflow(Vec<usize>),
}

pub fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// A scalar that can be stored in a tensor blob.
pub trait Element: Copy + Sized {
    const DTYPE: DType;
    fn read_le(bytes: &[u8]) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
}

macro_rules! impl_element {
    ($ty:ty, $dtype:expr) => {
        impl Element for $ty {
            const DTYPE: DType = $dtype;

            #[inline]
            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; std::mem::size_of::<$ty>()];
                buf.copy_from_slice(bytes);
                <$ty>::from_le_bytes(buf)
            }

            #[inline]
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
    };
}

impl_element!(f32, DType::F32);
impl_element!(f64, DType::F64);
impl_element!(u8, DType::U8);
impl_element!(u16, DType::U16);
impl_element!(u32, DType::U32);

/// Decodes a headerless little-endian blob of the given shape.
pub fn decode<T: Element>(bytes: &[u8], shape: &[usize]) -> Result<Vec<T>, TensorError> {
    let count = element_count(shape).ok_or_else(|| TensorError::ShapeOverflow(shape.to_vec()))?;
    let size = T::DTYPE.size();
    let expected = count
        .checked_mul(size)
        .ok_or_else(|| TensorError::ShapeOverflow(shape.to_vec()))?;
    if bytes.len() != expected {
        return Err(TensorError::ByteLength {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes.chunks_exact(size).map(T::read_le).collect())
}

pub fn encode<T: Element>(data: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * T::DTYPE.size());
    for &v in data {
        v.write_le(&mut out);
    }
    out
}

/// Failure while reading or writing a tensor that belongs to a named field.
#[derive(Debug, Error)]
pub enum BlobError {
    #[error("{field}: missing file {path}")]
    MissingFile { field: String, path: PathBuf },
    #[error("{field}: {source}")]
    Tensor {
        field: String,
        #[source]
        source: TensorError,
    },
    #[error("{field}: i/o error on {path}: {source}")]
    Io {
        field: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn read_blob(base_dir: &Path, desc: &TensorDescriptor, field: &str) -> Result<Vec<u8>, BlobError> {
    let path = desc.resolve(base_dir);
    match fs::read(&path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(BlobError::MissingFile {
            field: field.to_string(),
            path,
        }),
        Err(source) => Err(BlobError::Io {
            field: field.to_string(),
            path,
            source,
        }),
    }
}

pub fn read_tensor<T: Element>(
    base_dir: &Path,
    desc: &TensorDescriptor,
    field: &str,
) -> Result<Vec<T>, BlobError> {
    let wrap = |source| BlobError::Tensor {
        field: field.to_string(),
        source,
    };
    if desc.dtype != T::DTYPE {
        return Err(wrap(TensorError::DType {
            expected: T::DTYPE,
            found: desc.dtype,
        }));
    }
    let bytes = read_blob(base_dir, desc, field)?;
    decode(&bytes, &desc.shape).map_err(wrap)
}

pub fn write_tensor<T: Element>(
    dir: &Path,
    file_name: &str,
    data: &[T],
    shape: Vec<usize>,
) -> Result<TensorDescriptor, BlobError> {
    debug_assert_eq!(element_count(&shape), Some(data.len()));
    let path = dir.join(file_name);
    fs::write(&path, encode(data)).map_err(|source| BlobError::Io {
        field: file_name.to_string(),
        path,
        source,
    })?;
    Ok(TensorDescriptor::new(file_name, T::DTYPE, shape))
}

/// A named bundle of tensors plus free-form metadata, stored as
/// `<stem>.json` with blobs `<stem>.<name>.bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archive {
    pub kind: String,
    pub version: u32,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, TensorDescriptor>,
}

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error("archive {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("archive {path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("archive {path}: expected kind {expected:?}, found {found:?}")]
    Kind {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("archive is missing tensor {0:?}")]
    MissingTensor(String),
    #[error("archive field {field}: {message}")]
    Invalid { field: String, message: String },
}

impl Archive {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.to_string(),
            version: 1,
            meta,
            tensors: BTreeMap::new(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn put<T: Element>(
        &mut self,
        dir: &Path,
        stem: &str,
        name: &str,
        data: &[T],
        shape: Vec<usize>,
    ) -> Result<(), ArchiveError> {
        let desc = write_tensor(dir, &format!("{stem}.{name}.bin"), data, shape)?;
        self.tensors.insert(name.to_string(), desc);
        Ok(())
    }

    pub fn get<T: Element>(&self, dir: &Path, name: &str) -> Result<(Vec<T>, Vec<usize>), ArchiveError> {
        let desc = self
            .tensors
            .get(name)
            .ok_or_else(|| ArchiveError::MissingTensor(name.to_string()))?;
        let data = read_tensor::<T>(dir, desc, name)?;
        Ok((data, desc.shape.clone()))
    }

    /// Writes `<dir>/<stem>.json`. Blobs must already have been written with [`Archive::put`].
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf, ArchiveError> {
        let path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(self).map_err(|source| ArchiveError::Json {
            path: path.clone(),
            source,
        })?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| ArchiveError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(path: &Path, expected_kind: &str) -> Result<Self, ArchiveError> {
        let text = fs::read_to_string(path).map_err(|source| ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let archive = Self::from_json_str(&text).map_err(|source| ArchiveError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if archive.kind != expected_kind {
            return Err(ArchiveError::Kind {
                path: path.to_path_buf(),
                expected: expected_kind.to_string(),
                found: archive.kind,
            });
        }
        Ok(archive)
    }

    pub fn meta_usize(&self, key: &str) -> Result<usize, ArchiveError> {
        self.meta
            .get(key)
            .and_then(|v| v.as_u64())
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| ArchiveError::Invalid {
                field: format!("meta.{key}"),
                message: "expected a non-negative integer".into(),
            })
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64, ArchiveError> {
        self.meta
            .get(key)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| ArchiveError::Invalid {
                field: format!("meta.{key}"),
                message: "expected a number".into(),
            })
    }
}

/// Checks that a tensor's shape equals `expected`.
pub fn expect_shape(field: &str, shape: &[usize], expected: &[usize]) -> Result<(), ArchiveError> {
    if shape != expected {
        return Err(ArchiveError::Invalid {
            field: field.to_string(),
            message: format!("shape {shape:?}, expected {expected:?}"),
        });
    }
    Ok(())
}
