//! Persistence for flattened heatmap vectors.
//!
//! Two interchangeable backends sit behind [`StoreHandle`]: a SQLite table
//! and a single binary file that is rewritten atomically on every insert.
//! Both assign record ids `1, 2, 3, …` in insertion order and return records
//! ordered by id.

mod file;
mod sql;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use file::{FileStore, FILE_MAGIC, FILE_VERSION};
pub use sql::{SqlStore, SQL_SCHEMA};

use crate::models::NUM_CLASSES;

/// Longest user id either backend accepts, in bytes.
pub const MAX_USER_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open store at {target}: {reason}")]
    ConnectionFailed { target: String, reason: String },
    #[error("incompatible existing store: {0}")]
    SchemaMismatch(String),
    #[error("invalid record: {0}")]
    Validation(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("store used before init_schema")]
    NotInitialized,
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    /// Assigned by the store; ignored on insert.
    pub record_id: u64,
    pub user: String,
    pub label: u8,
    pub vector: Vec<f32>,
    /// UTC seconds.
    pub created_at: i64,
}

impl VectorRecord {
    /// Bitwise equality, so that NaN payloads and signed zeros count.
    pub fn same_bits(&self, other: &VectorRecord) -> bool {
        self.record_id == other.record_id
            && self.user == other.user
            && self.label == other.label
            && self.created_at == other.created_at
            && self.vector.len() == other.vector.len()
            && self.vector.iter().zip(&other.vector).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// All set fields must match; id bounds are inclusive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub user: Option<String>,
    pub label: Option<u8>,
    pub min_id: Option<u64>,
    pub max_id: Option<u64>,
}

impl RecordFilter {
    pub fn matches(&self, r: &VectorRecord) -> bool {
        self.user.as_ref().is_none_or(|u| *u == r.user)
            && self.label.is_none_or(|l| l == r.label)
            && self.min_id.is_none_or(|m| r.record_id >= m)
            && self.max_id.is_none_or(|m| r.record_id <= m)
    }
}

pub(crate) fn validate_record(r: &VectorRecord, grid_size: usize) -> Result<()> {
    let want = grid_size * grid_size;
    if r.vector.len() != want {
        return Err(StoreError::Validation(format!(
            "vector has {} values, expected {want}",
            r.vector.len()
        )));
    }
    if usize::from(r.label) >= NUM_CLASSES {
        return Err(StoreError::Validation(format!("label {} out of range", r.label)));
    }
    if r.user.len() > MAX_USER_LEN {
        return Err(StoreError::Validation(format!("user id longer than {MAX_USER_LEN} bytes")));
    }
    Ok(())
}

/// Where a store lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreDescriptor {
    /// `sqlite://<path>`, `sqlite::memory:`, or `sql:<path>`.
    Sql(String),
    /// Anything else is a file path.
    File(PathBuf),
}

impl StoreDescriptor {
    pub fn parse(descriptor: &str) -> Self {
        if descriptor == "sqlite::memory:" {
            return StoreDescriptor::Sql(":memory:".into());
        }
        for prefix in ["sqlite://", "sql:"] {
            if let Some(rest) = descriptor.strip_prefix(prefix) {
                return StoreDescriptor::Sql(rest.into());
            }
        }
        StoreDescriptor::File(PathBuf::from(descriptor.strip_prefix("file:").unwrap_or(descriptor)))
    }
}

#[derive(Debug)]
pub enum StoreHandle {
    File(FileStore),
    Sql(SqlStore),
}

/// Opens a store for heatmaps of side `grid_size`; call
/// [`StoreHandle::init_schema`] before anything else.
pub fn open_store(descriptor: &str, grid_size: usize) -> Result<StoreHandle> {
    if grid_size == 0 || grid_size > usize::from(u16::MAX) {
        return Err(StoreError::Validation(format!("unsupported grid size {grid_size}")));
    }
    Ok(match StoreDescriptor::parse(descriptor) {
        StoreDescriptor::Sql(target) => StoreHandle::Sql(SqlStore::open(&target, grid_size)?),
        StoreDescriptor::File(path) => StoreHandle::File(FileStore::open(&path, grid_size)?),
    })
}

impl StoreHandle {
    pub fn init_schema(&mut self) -> Result<()> {
        match self {
            StoreHandle::File(s) => s.init_schema(),
            StoreHandle::Sql(s) => s.init_schema(),
        }
    }

    /// Inserts every record or none; returns how many were inserted.
    pub fn insert_batch(&mut self, records: &[VectorRecord]) -> Result<usize> {
        match self {
            StoreHandle::File(s) => s.insert_batch(records),
            StoreHandle::Sql(s) => s.insert_batch(records),
        }
    }

    pub fn fetch(&self, filter: &RecordFilter) -> Result<Vec<VectorRecord>> {
        match self {
            StoreHandle::File(s) => s.fetch(filter),
            StoreHandle::Sql(s) => s.fetch(filter),
        }
    }

    pub fn count(&self) -> Result<u64> {
        match self {
            StoreHandle::File(s) => s.count(),
            StoreHandle::Sql(s) => s.count(),
        }
    }

    pub fn backend(&self) -> &'static str {
        match self {
            StoreHandle::File(_) => "file",
            StoreHandle::Sql(_) => "sql",
        }
    }

    pub fn close(self) -> Result<()> {
        match self {
            StoreHandle::File(_) => Ok(()),
            StoreHandle::Sql(s) => s.close(),
        }
    }
}
