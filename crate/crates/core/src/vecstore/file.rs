use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{validate_record, RecordFilter, Result, StoreError, VectorRecord};

pub const FILE_MAGIC: &[u8; 4] = b"VLVS";
pub const FILE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 8;

/// Single-file store. The whole file is rewritten into a sibling temp file
/// and renamed over the original on every insert, so a reader sees either
/// the old or the new contents.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    grid_size: usize,
    records: Option<Vec<VectorRecord>>,
}

impl FileStore {
    pub fn open(path: &Path, grid_size: usize) -> Result<Self> {
        let failed = |reason: &str| StoreError::ConnectionFailed {
            target: path.display().to_string(),
            reason: reason.to_string(),
        };
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        if !parent.is_dir() {
            return Err(failed("directory does not exist"));
        }
        if path.is_dir() {
            return Err(failed("path is a directory"));
        }
        Ok(FileStore {
            path: path.to_path_buf(),
            grid_size,
            records: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Creates an empty file, or loads and validates an existing one.
    pub fn init_schema(&mut self) -> Result<()> {
        if self.records.is_some() {
            return Ok(());
        }
        let records = if self.path.exists() {
            decode(&fs::read(&self.path)?, self.grid_size)?
        } else {
            self.write_all(&[])?;
            Vec::new()
        };
        self.records = Some(records);
        Ok(())
    }

    fn loaded(&self) -> Result<&Vec<VectorRecord>> {
        self.records.as_ref().ok_or(StoreError::NotInitialized)
    }

    pub fn insert_batch(&mut self, batch: &[VectorRecord]) -> Result<usize> {
        let current = self.loaded()?;
        if batch.is_empty() {
            return Ok(0);
        }
        for r in batch {
            validate_record(r, self.grid_size)?;
        }
        let first_id = current.last().map_or(1, |r| r.record_id + 1);
        let mut updated = current.clone();
        for (record_id, r) in (first_id..).zip(batch) {
            updated.push(VectorRecord {
                record_id,
                ..r.clone()
            });
        }
        self.write_all(&updated)?;
        self.records = Some(updated);
        Ok(batch.len())
    }

    pub fn fetch(&self, filter: &RecordFilter) -> Result<Vec<VectorRecord>> {
        Ok(self.loaded()?.iter().filter(|r| filter.matches(r)).cloned().collect())
    }

    pub fn count(&self) -> Result<u64> {
        Ok(self.loaded()?.len() as u64)
    }

    fn write_all(&self, records: &[VectorRecord]) -> Result<()> {
        let name = self.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = self.path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
        let result = (|| -> Result<()> {
            let file = File::create(&tmp)?;
            let mut w = BufWriter::new(file);
            encode(&mut w, self.grid_size, records)?;
            let file = w.into_inner().map_err(|e| StoreError::Storage(e.to_string()))?;
            file.sync_all()?;
            fs::rename(&tmp, &self.path)?;
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }
}

fn encode<W: Write>(w: &mut W, grid_size: usize, records: &[VectorRecord]) -> Result<()> {
    w.write_all(FILE_MAGIC)?;
    w.write_all(&FILE_VERSION.to_le_bytes())?;
    w.write_all(&(grid_size as u16).to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        w.write_all(&r.record_id.to_le_bytes())?;
        w.write_all(&(r.user.len() as u16).to_le_bytes())?;
        w.write_all(r.user.as_bytes())?;
        w.write_all(&[r.label])?;
        w.write_all(&r.created_at.to_le_bytes())?;
        for v in &r.vector {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| StoreError::SchemaMismatch(format!("file truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
}

fn decode(bytes: &[u8], grid_size: usize) -> Result<Vec<VectorRecord>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != FILE_MAGIC {
        return Err(StoreError::SchemaMismatch("not a vector store file".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = u16::from_le_bytes(r.array()?);
    if version != FILE_VERSION {
        return Err(StoreError::SchemaMismatch(format!("unsupported version {version}")));
    }
    let stored_grid = usize::from(u16::from_le_bytes(r.array()?));
    if stored_grid != grid_size {
        return Err(StoreError::SchemaMismatch(format!(
            "file holds {stored_grid}x{stored_grid} grids, expected {grid_size}x{grid_size}"
        )));
    }
    let count = u64::from_le_bytes(r.array()?);
    let width = grid_size * grid_size;
    let mut records = Vec::new();
    for _ in 0..count {
        let record_id = u64::from_le_bytes(r.array()?);
        let user_len = usize::from(u16::from_le_bytes(r.array()?));
        let user = std::str::from_utf8(r.take(user_len)?)
            .map_err(|_| StoreError::SchemaMismatch("user id is not UTF-8".into()))?
            .to_string();
        let [label] = r.array()?;
        let created_at = i64::from_le_bytes(r.array()?);
        let vector = r
            .take(4 * width)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        records.push(VectorRecord {
            record_id,
            user,
            label,
            vector,
            created_at,
        });
    }
    if r.pos != bytes.len() {
        return Err(StoreError::SchemaMismatch("trailing bytes after last record".into()));
    }
    Ok(records)
}
