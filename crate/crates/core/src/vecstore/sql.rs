use rusqlite::{params, params_from_iter, Connection, OpenFlags};

use super::{validate_record, RecordFilter, Result, StoreError, VectorRecord};

/// Table definition; vectors are little-endian `f32` blobs.
pub const SQL_SCHEMA: &str = "CREATE TABLE IF NOT EXISTS trajectory_vectors (\
record_id BIGINT PRIMARY KEY, \
user_id VARCHAR(64) NOT NULL, \
label SMALLINT NOT NULL, \
vec BLOB NOT NULL, \
created_at BIGINT NOT NULL)";

const INDEXES: [(&str, &str); 2] = [
    ("idx_tv_user", "CREATE INDEX idx_tv_user ON trajectory_vectors(user_id)"),
    ("idx_tv_label", "CREATE INDEX idx_tv_label ON trajectory_vectors(label)"),
];

const COLUMNS: [&str; 5] = ["record_id", "user_id", "label", "vec", "created_at"];

#[derive(Debug)]
pub struct SqlStore {
    conn: Connection,
    grid_size: usize,
    initialized: bool,
}

impl SqlStore {
    /// `target` is a database path or `:memory:`.
    pub fn open(target: &str, grid_size: usize) -> Result<Self> {
        let flags = OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_CREATE | OpenFlags::SQLITE_OPEN_NO_MUTEX;
        let conn = Connection::open_with_flags(target, flags).map_err(|e| StoreError::ConnectionFailed {
            target: target.to_string(),
            reason: e.to_string(),
        })?;
        Ok(SqlStore {
            conn,
            grid_size,
            initialized: false,
        })
    }

    /// Creates the table and indexes if missing and checks an existing
    /// table's columns.
    pub fn init_schema(&mut self) -> Result<()> {
        let tx = self.conn.transaction()?;
        tx.execute(SQL_SCHEMA, [])?;
        let columns: Vec<String> = {
            let mut stmt = tx.prepare("SELECT name FROM pragma_table_info('trajectory_vectors') ORDER BY cid")?;
            let names = stmt.query_map([], |row| row.get(0))?;
            names.collect::<rusqlite::Result<_>>()?
        };
        if columns != COLUMNS {
            return Err(StoreError::SchemaMismatch(format!(
                "trajectory_vectors has columns {columns:?}"
            )));
        }
        for (name, ddl) in INDEXES {
            let exists: bool = tx.query_row(
                "SELECT EXISTS(SELECT 1 FROM sqlite_master WHERE type = 'index' AND name = ?1)",
                [name],
                |row| row.get(0),
            )?;
            if !exists {
                tx.execute(ddl, [])?;
            }
        }
        tx.commit()?;
        self.initialized = true;
        Ok(())
    }

    fn ready(&self) -> Result<()> {
        if self.initialized {
            Ok(())
        } else {
            Err(StoreError::NotInitialized)
        }
    }

    pub fn insert_batch(&mut self, batch: &[VectorRecord]) -> Result<usize> {
        self.ready()?;
        if batch.is_empty() {
            return Ok(0);
        }
        for r in batch {
            validate_record(r, self.grid_size)?;
        }
        let tx = self.conn.transaction()?;
        let last: i64 = tx.query_row("SELECT COALESCE(MAX(record_id), 0) FROM trajectory_vectors", [], |row| {
            row.get(0)
        })?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO trajectory_vectors (record_id, user_id, label, vec, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
            )?;
            for (k, r) in batch.iter().enumerate() {
                let blob: Vec<u8> = r.vector.iter().flat_map(|v| v.to_le_bytes()).collect();
                stmt.execute(params![last + 1 + k as i64, r.user, r.label, blob, r.created_at])?;
            }
        }
        tx.commit()?;
        Ok(batch.len())
    }

    pub fn fetch(&self, filter: &RecordFilter) -> Result<Vec<VectorRecord>> {
        self.ready()?;
        let mut sql = String::from("SELECT record_id, user_id, label, vec, created_at FROM trajectory_vectors WHERE 1 = 1");
        let mut args: Vec<rusqlite::types::Value> = Vec::new();
        if let Some(user) = &filter.user {
            args.push(user.clone().into());
            sql.push_str(&format!(" AND user_id = ?{}", args.len()));
        }
        if let Some(label) = filter.label {
            args.push(i64::from(label).into());
            sql.push_str(&format!(" AND label = ?{}", args.len()));
        }
        for (bound, op) in [(filter.min_id, ">="), (filter.max_id, "<=")] {
            if let Some(id) = bound {
                // ids above i64::MAX cannot exist in the table
                let id = i64::try_from(id).unwrap_or(i64::MAX);
                args.push(id.into());
                sql.push_str(&format!(" AND record_id {op} ?{}", args.len()));
            }
        }
        sql.push_str(" ORDER BY record_id");
        let width = self.grid_size * self.grid_size;
        let mut stmt = self.conn.prepare(&sql)?;
        let rows = stmt.query_map(params_from_iter(args), |row| {
            Ok((
                row.get::<_, i64>(0)?,
                row.get::<_, String>(1)?,
                row.get::<_, i64>(2)?,
                row.get::<_, Vec<u8>>(3)?,
                row.get::<_, i64>(4)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, user, label, blob, created_at) = row?;
            if blob.len() != 4 * width {
                return Err(StoreError::SchemaMismatch(format!(
                    "record {id} holds {} bytes, expected {}",
                    blob.len(),
                    4 * width
                )));
            }
            let label = u8::try_from(label).map_err(|_| StoreError::SchemaMismatch(format!("record {id} label {label}")))?;
            out.push(VectorRecord {
                record_id: id as u64,
                user,
                label,
                vector: blob
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
                created_at,
            });
        }
        Ok(out)
    }

    pub fn count(&self) -> Result<u64> {
        self.ready()?;
        let n: i64 = self.conn.query_row("SELECT COUNT(*) FROM trajectory_vectors", [], |row| row.get(0))?;
        Ok(n as u64)
    }

    pub fn close(self) -> Result<()> {
        self.conn.close().map_err(|(_, e)| StoreError::from(e))
    }
}
