use std::collections::BTreeMap;

use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::Store;
use crate::error::{Error, Result};
use crate::lang::FileExtraction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHashRecord {
    pub file_path: String,
    pub digest: u64,
    pub indexed_at: i64,
}

/// Per-file resolution counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub call_sites: u64,
    pub resolved_calls: u64,
    pub unresolved_calls: u64,
    pub by_strategy: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdrRecord {
    pub id: i64,
    pub title: String,
    pub status: String,
    pub body: String,
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub caller_qname: String,
    pub callee_qname: String,
    pub count: u64,
}

pub(crate) fn now_secs() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

// Digests are stored as the i64 with the same bit pattern.
fn to_sql_digest(d: u64) -> i64 {
    d as i64
}

fn from_sql_digest(d: i64) -> u64 {
    d as u64
}

impl Store {
    pub fn file_hash_get(&self, file_path: &str) -> Result<Option<u64>> {
        Ok(self
            .conn()
            .query_row("SELECT digest FROM file_hashes WHERE file_path = ?1", [file_path], |r| r.get::<_, i64>(0))
            .optional()?
            .map(from_sql_digest))
    }

    /// Stores `digest`, returning the previous one.
    pub fn file_hash_set(&self, file_path: &str, digest: u64) -> Result<Option<u64>> {
        let previous = self.file_hash_get(file_path)?;
        file_hash_put(self.conn(), file_path, digest)?;
        Ok(previous)
    }

    pub fn file_hashes(&self) -> Result<BTreeMap<String, u64>> {
        let mut stmt = self.conn().prepare("SELECT file_path, digest FROM file_hashes")?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, from_sql_digest(r.get(1)?))))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn cached_extractions(&self) -> Result<Vec<(u64, FileExtraction)>> {
        let mut stmt = self
            .conn()
            .prepare("SELECT digest, extraction FROM file_cache ORDER BY file_path")?;
        let rows = stmt.query_map([], |r| Ok((from_sql_digest(r.get(0)?), r.get::<_, String>(1)?)))?;
        let mut out = Vec::new();
        for row in rows {
            let (digest, json) = row?;
            out.push((digest, serde_json::from_str(&json)?));
        }
        Ok(out)
    }

    pub fn diagnostics(&self) -> Result<BTreeMap<String, Diagnostics>> {
        let mut stmt = self.conn().prepare(
            "SELECT file_path, call_sites, resolved_calls, unresolved_calls, by_strategy FROM diagnostics",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, i64>(2)?,
                r.get::<_, i64>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        let mut out = BTreeMap::new();
        for row in rows {
            let (path, sites, resolved, unresolved, json) = row?;
            out.insert(
                path,
                Diagnostics {
                    call_sites: sites as u64,
                    resolved_calls: resolved as u64,
                    unresolved_calls: unresolved as u64,
                    by_strategy: serde_json::from_str(&json).unwrap_or_default(),
                },
            );
        }
        Ok(out)
    }

    pub fn adr_create(&self, title: &str, status: &str, body: &str) -> Result<AdrRecord> {
        if title.trim().is_empty() {
            return Err(Error::validation("ADR title must not be empty"));
        }
        let created_at = now_secs();
        self.conn().execute(
            "INSERT INTO adr(title, status, body, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![title, status, body, created_at],
        )?;
        Ok(AdrRecord {
            id: self.conn().last_insert_rowid(),
            title: title.to_string(),
            status: status.to_string(),
            body: body.to_string(),
            created_at,
        })
    }

    pub fn adr_list(&self) -> Result<Vec<AdrRecord>> {
        let mut stmt = self
            .conn()
            .prepare("SELECT id, title, status, body, created_at FROM adr ORDER BY id")?;
        let rows = stmt.query_map([], adr_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn adr_get(&self, id: i64) -> Result<AdrRecord> {
        self.conn()
            .query_row("SELECT id, title, status, body, created_at FROM adr WHERE id = ?1", [id], adr_row)
            .optional()?
            .ok_or_else(|| Error::NotFound {
                what: format!("ADR {id}"),
                suggestions: Vec::new(),
            })
    }

    /// Adds trace counts; repeated pairs accumulate.
    pub fn traces_add(&self, records: &[TraceRecord]) -> Result<usize> {
        let mut stmt = self.conn().prepare_cached(
            "INSERT INTO traces(caller_qname, callee_qname, count) VALUES (?1, ?2, ?3)
             ON CONFLICT(caller_qname, callee_qname) DO UPDATE SET count = count + excluded.count",
        )?;
        for r in records {
            stmt.execute(params![r.caller_qname, r.callee_qname, r.count as i64])?;
        }
        Ok(records.len())
    }

    pub fn traces(&self) -> Result<Vec<TraceRecord>> {
        load_traces(self.conn())
    }
}

pub(crate) fn load_traces(conn: &rusqlite::Connection) -> Result<Vec<TraceRecord>> {
    let mut stmt =
        conn.prepare("SELECT caller_qname, callee_qname, count FROM traces ORDER BY caller_qname, callee_qname")?;
    let rows = stmt.query_map([], |r| {
        Ok(TraceRecord {
            caller_qname: r.get(0)?,
            callee_qname: r.get(1)?,
            count: r.get::<_, i64>(2)? as u64,
        })
    })?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

fn adr_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<AdrRecord> {
    Ok(AdrRecord {
        id: r.get(0)?,
        title: r.get(1)?,
        status: r.get(2)?,
        body: r.get(3)?,
        created_at: r.get(4)?,
    })
}

pub(crate) fn file_hash_put(conn: &rusqlite::Connection, file_path: &str, digest: u64) -> Result<()> {
    conn.prepare_cached(
        "INSERT INTO file_hashes(file_path, digest, indexed_at) VALUES (?1, ?2, ?3)
         ON CONFLICT(file_path) DO UPDATE SET digest = excluded.digest, indexed_at = excluded.indexed_at",
    )?
    .execute(params![file_path, to_sql_digest(digest), now_secs()])?;
    Ok(())
}

pub(crate) fn file_hash_delete(conn: &rusqlite::Connection, file_path: &str) -> Result<()> {
    conn.execute("DELETE FROM file_hashes WHERE file_path = ?1", [file_path])?;
    Ok(())
}

pub(crate) fn cache_put(conn: &rusqlite::Connection, digest: u64, ext: &FileExtraction) -> Result<()> {
    conn.prepare_cached(
        "INSERT INTO file_cache(file_path, digest, extraction) VALUES (?1, ?2, ?3)
         ON CONFLICT(file_path) DO UPDATE SET digest = excluded.digest, extraction = excluded.extraction",
    )?
    .execute(params![ext.path, to_sql_digest(digest), serde_json::to_string(ext)?])?;
    Ok(())
}

pub(crate) fn cache_delete(conn: &rusqlite::Connection, file_path: &str) -> Result<()> {
    conn.execute("DELETE FROM file_cache WHERE file_path = ?1", [file_path])?;
    Ok(())
}

pub(crate) fn diagnostics_put(conn: &rusqlite::Connection, file_path: &str, d: &Diagnostics) -> Result<()> {
    conn.prepare_cached(
        "INSERT INTO diagnostics(file_path, call_sites, resolved_calls, unresolved_calls, by_strategy)
         VALUES (?1, ?2, ?3, ?4, ?5)
         ON CONFLICT(file_path) DO UPDATE SET call_sites = excluded.call_sites,
           resolved_calls = excluded.resolved_calls, unresolved_calls = excluded.unresolved_calls,
           by_strategy = excluded.by_strategy",
    )?
    .execute(params![
        file_path,
        d.call_sites as i64,
        d.resolved_calls as i64,
        d.unresolved_calls as i64,
        serde_json::to_string(&d.by_strategy)?,
    ])?;
    Ok(())
}
