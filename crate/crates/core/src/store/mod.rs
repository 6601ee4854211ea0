//! Single-file SQLite store: graph tables, file hashes, cached per-file
//! extractions, diagnostics, ADRs and ingested traces.
//!
//! One writer at a time, enforced with an advisory lock file next to the
//! database; readers run concurrently under WAL.

mod graph;
mod records;
mod schema;

use std::fs::{File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};

use rusqlite::hooks::{AuthAction, AuthContext, Authorization};
use rusqlite::{Connection, ErrorCode, OpenFlags, OptionalExtension};

use crate::error::{Error, Result};

pub use graph::{
    bulk_insert, canonical_graph, delete_edges, delete_nodes, flush_buffer, insert_edge, insert_node, load_edges,
    load_nodes, node_id_map, update_edge, update_node, CanonicalEdge, CanonicalGraph, EdgeKey,
};
pub use records::{AdrRecord, Diagnostics, FileHashRecord, TraceRecord};
pub(crate) use records::{cache_delete, cache_put, diagnostics_put, file_hash_delete, file_hash_put, now_secs};
pub use schema::SCHEMA_VERSION;

/// Overrides the store location for every command.
pub const DB_ENV: &str = "CODEGRAPH_DB";
/// Overrides the per-user data directory.
pub const HOME_ENV: &str = "CODEGRAPH_HOME";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenMode {
    ReadWrite,
    ReadOnly,
}

#[derive(Debug)]
pub struct Store {
    conn: Connection,
    path: PathBuf,
    mode: OpenMode,
    /// Held for the lifetime of a read-write handle.
    _lock: Option<File>,
    /// Set when an incompatible schema was found and wiped on open.
    pub reset_on_open: bool,
}

/// Statement authorizer: ATTACH and DETACH are denied, everything else
/// is allowed.
pub fn authorize_statement(action: &AuthAction<'_>) -> Authorization {
    match action {
        AuthAction::Attach { .. } | AuthAction::Detach { .. } => Authorization::Deny,
        _ => Authorization::Allow,
    }
}

fn lock_path(db: &Path) -> PathBuf {
    let mut name = db.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    db.with_file_name(name)
}

/// Converts an authorizer denial into a rejection; other errors pass through.
pub fn map_sql_error(err: rusqlite::Error) -> Error {
    match &err {
        rusqlite::Error::SqliteFailure(e, msg) if e.code == ErrorCode::AuthorizationForStatementDenied => {
            Error::QueryRejected(msg.clone().unwrap_or_else(|| "statement not authorized".to_string()))
        }
        _ => Error::Sqlite(err),
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>, mode: OpenMode) -> Result<Store> {
        let path = path.as_ref().to_path_buf();
        let lock = match mode {
            OpenMode::ReadWrite => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .truncate(false)
                    .write(true)
                    .open(lock_path(&path))?;
                match file.try_lock() {
                    Ok(()) => Some(file),
                    Err(TryLockError::WouldBlock) => return Err(Error::Busy { path }),
                    Err(TryLockError::Error(e)) => return Err(Error::Io(e)),
                }
            }
            OpenMode::ReadOnly => None,
        };
        let conn = match mode {
            OpenMode::ReadWrite => Connection::open(&path)?,
            OpenMode::ReadOnly => {
                if !path.exists() {
                    return Err(Error::NotFound {
                        what: format!("store {}", path.display()),
                        suggestions: vec!["run `codegraph index <repo>` first".to_string()],
                    });
                }
                Connection::open_with_flags(
                    &path,
                    OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI,
                )?
            }
        };
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch("PRAGMA foreign_keys = ON;")?;
        let mut store = Store {
            conn,
            path,
            mode,
            _lock: lock,
            reset_on_open: false,
        };
        if mode == OpenMode::ReadWrite {
            store.conn.pragma_update(None, "journal_mode", "WAL")?;
            store.conn.pragma_update(None, "synchronous", "NORMAL")?;
            store.reset_on_open = schema::ensure(&store.conn)?;
        } else {
            let found = schema::version(&store.conn)?;
            if found != Some(SCHEMA_VERSION) {
                return Err(Error::SchemaMismatch {
                    found: found.unwrap_or(0),
                    expected: SCHEMA_VERSION,
                });
            }
        }
        store.conn.authorizer(Some(|ctx: AuthContext<'_>| authorize_statement(&ctx.action)))?;
        crate::query::register_functions(&store.conn)?;
        Ok(store)
    }

    /// Replaces the stored graph with `buffer` in one transaction.
    pub fn replace_graph(&mut self, buffer: &crate::graph::GraphBuffer) -> Result<Vec<i64>> {
        let tx = self.conn.transaction()?;
        let ids = flush_buffer(&tx, buffer)?;
        tx.commit()?;
        Ok(ids)
    }

    pub fn conn(&self) -> &Connection {
        &self.conn
    }

    pub fn conn_mut(&mut self) -> &mut Connection {
        &mut self.conn
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn mode(&self) -> OpenMode {
        self.mode
    }

    pub fn journal_mode(&self) -> Result<String> {
        Ok(self.conn.pragma_query_value(None, "journal_mode", |r| r.get(0))?)
    }

    /// Runs raw SQL through the authorizer. Denied statements surface as
    /// [`Error::QueryRejected`]; statements before the denied one keep their
    /// effect, as in any multi-statement batch.
    pub fn execute_raw(&self, sql: &str) -> Result<()> {
        self.conn.execute_batch(sql).map_err(map_sql_error)
    }

    pub fn meta(&self, key: &str) -> Result<Option<String>> {
        Ok(self
            .conn
            .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
            .optional()?)
    }

    pub fn set_meta(&self, key: &str, value: &str) -> Result<()> {
        set_meta(&self.conn, key, value)
    }

    /// Bumped on every committed graph change; lets in-memory snapshots
    /// detect writes made by other handles.
    pub fn generation(&self) -> Result<u64> {
        Ok(self.meta("generation")?.and_then(|v| v.parse().ok()).unwrap_or(0))
    }

    pub fn count_nodes(&self) -> Result<usize> {
        Ok(self.conn.query_row("SELECT COUNT(*) FROM nodes", [], |r| r.get::<_, i64>(0))? as usize)
    }

    pub fn count_edges(&self) -> Result<usize> {
        Ok(self.conn.query_row("SELECT COUNT(*) FROM edges", [], |r| r.get::<_, i64>(0))? as usize)
    }

    /// Edges whose endpoints are missing from the node table.
    pub fn dangling_edges(&self) -> Result<usize> {
        Ok(self.conn.query_row(
            "SELECT COUNT(*) FROM edges e WHERE NOT EXISTS (SELECT 1 FROM nodes n WHERE n.id = e.src)
               OR NOT EXISTS (SELECT 1 FROM nodes n WHERE n.id = e.dst)",
            [],
            |r| r.get::<_, i64>(0),
        )? as usize)
    }
}

pub(crate) fn set_meta(conn: &Connection, key: &str, value: &str) -> Result<()> {
    conn.execute(
        "INSERT INTO meta(key, value) VALUES (?1, ?2) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
        [key, value],
    )?;
    Ok(())
}

pub(crate) fn bump_generation(conn: &Connection) -> Result<u64> {
    let current: u64 = conn
        .query_row("SELECT value FROM meta WHERE key = 'generation'", [], |r| r.get::<_, String>(0))
        .optional()?
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    set_meta(conn, "generation", &(current + 1).to_string())?;
    Ok(current + 1)
}

/// Per-user data directory: `$CODEGRAPH_HOME`, else the XDG cache
/// directory, else `~/.cache/codegraph`.
pub fn data_dir() -> PathBuf {
    if let Some(home) = std::env::var_os(HOME_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(home);
    }
    if let Some(xdg) = std::env::var_os("XDG_CACHE_HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(xdg).join("codegraph");
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    home.join(".cache").join("codegraph")
}

/// Store file for a repository, keyed by its canonical path.
pub fn default_store_path(repo_root: &Path) -> PathBuf {
    if let Some(db) = std::env::var_os(DB_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(db);
    }
    let canonical = repo_root.canonicalize().unwrap_or_else(|_| repo_root.to_path_buf());
    let name: String = canonical
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "root".to_string())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let digest = xxhash_rust::xxh3::xxh3_64(canonical.to_string_lossy().as_bytes());
    data_dir().join(format!("{name}-{digest:016x}.db"))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProjectInfo {
    pub name: String,
    pub repo_root: String,
    pub store_path: String,
    pub indexed_at: Option<String>,
    pub nodes: usize,
    pub edges: usize,
}

pub fn project_info(store: &Store) -> Result<ProjectInfo> {
    Ok(ProjectInfo {
        name: store.meta("project")?.unwrap_or_default(),
        repo_root: store.meta("repo_root")?.unwrap_or_default(),
        store_path: store.path().display().to_string(),
        indexed_at: store.meta("indexed_at")?,
        nodes: store.count_nodes()?,
        edges: store.count_edges()?,
    })
}

/// Projects with a store in `dir`, sorted by name.
pub fn list_projects(dir: &Path) -> Result<Vec<ProjectInfo>> {
    let mut out = Vec::new();
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(out);
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "db") {
            match Store::open(&path, OpenMode::ReadOnly).and_then(|s| project_info(&s)) {
                Ok(info) => out.push(info),
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name).then(a.store_path.cmp(&b.store_path)));
    Ok(out)
}

/// Removes a store file and its WAL side files. Fails with `Busy` while a
/// writer holds it.
pub fn delete_store(path: &Path) -> Result<bool> {
    if !path.exists() {
        return Ok(false);
    }
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(lock_path(path))?;
    if let Err(TryLockError::WouldBlock) = lock.try_lock() {
        return Err(Error::Busy {
            path: path.to_path_buf(),
        });
    }
    for suffix in ["", "-wal", "-shm"] {
        let mut p = path.as_os_str().to_os_string();
        p.push(suffix);
        let _ = std::fs::remove_file(PathBuf::from(p));
    }
    drop(lock);
    let _ = std::fs::remove_file(lock_path(path));
    Ok(true)
}
