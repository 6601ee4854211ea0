use rusqlite::{Connection, OptionalExtension};

use crate::error::Result;

/// Bumped whenever the table layout changes; a mismatch wipes the store
/// and forces a full re-index.
pub const SCHEMA_VERSION: i64 = 1;

const TABLES: &str = "
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS nodes (
    id             INTEGER PRIMARY KEY,
    label          TEXT NOT NULL,
    qualified_name TEXT NOT NULL,
    simple_name    TEXT NOT NULL,
    file_path      TEXT NOT NULL,
    start_line     INTEGER NOT NULL,
    end_line       INTEGER NOT NULL,
    properties     TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS edges (
    id         INTEGER PRIMARY KEY,
    src        INTEGER NOT NULL REFERENCES nodes(id),
    dst        INTEGER NOT NULL REFERENCES nodes(id),
    type       TEXT NOT NULL,
    confidence REAL NOT NULL CHECK (confidence >= 0.0 AND confidence <= 1.0),
    properties TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS file_hashes (
    file_path  TEXT PRIMARY KEY,
    digest     INTEGER NOT NULL,
    indexed_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS file_cache (
    file_path  TEXT PRIMARY KEY,
    digest     INTEGER NOT NULL,
    extraction TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS diagnostics (
    file_path        TEXT PRIMARY KEY,
    call_sites       INTEGER NOT NULL,
    resolved_calls   INTEGER NOT NULL,
    unresolved_calls INTEGER NOT NULL,
    by_strategy      TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS adr (
    id         INTEGER PRIMARY KEY,
    title      TEXT NOT NULL,
    status     TEXT NOT NULL,
    body       TEXT NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS traces (
    caller_qname TEXT NOT NULL,
    callee_qname TEXT NOT NULL,
    count        INTEGER NOT NULL,
    PRIMARY KEY (caller_qname, callee_qname)
);
";

/// Secondary indexes, created after bulk insertion.
pub(crate) const INDEXES: &[(&str, &str)] = &[
    ("idx_nodes_key", "CREATE UNIQUE INDEX IF NOT EXISTS idx_nodes_key ON nodes(label, qualified_name)"),
    ("idx_nodes_qname", "CREATE INDEX IF NOT EXISTS idx_nodes_qname ON nodes(qualified_name)"),
    ("idx_nodes_simple", "CREATE INDEX IF NOT EXISTS idx_nodes_simple ON nodes(simple_name)"),
    ("idx_nodes_file", "CREATE INDEX IF NOT EXISTS idx_nodes_file ON nodes(file_path)"),
    ("idx_edges_src", "CREATE INDEX IF NOT EXISTS idx_edges_src ON edges(src, type)"),
    ("idx_edges_dst", "CREATE INDEX IF NOT EXISTS idx_edges_dst ON edges(dst, type)"),
    ("idx_edges_type", "CREATE INDEX IF NOT EXISTS idx_edges_type ON edges(type)"),
];

pub(crate) fn create_indexes(conn: &Connection) -> Result<()> {
    for (_, sql) in INDEXES {
        conn.execute_batch(sql)?;
    }
    Ok(())
}

pub(crate) fn drop_indexes(conn: &Connection) -> Result<()> {
    for (name, _) in INDEXES {
        conn.execute_batch(&format!("DROP INDEX IF EXISTS {name}"))?;
    }
    Ok(())
}

pub(crate) fn version(conn: &Connection) -> Result<Option<i64>> {
    let has_meta: bool = conn
        .query_row(
            "SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = 'meta'",
            [],
            |_| Ok(true),
        )
        .optional()?
        .unwrap_or(false);
    if !has_meta {
        return Ok(None);
    }
    Ok(conn
        .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get::<_, String>(0))
        .optional()?
        .and_then(|v| v.parse().ok()))
}

/// Creates the schema; wipes it first when an incompatible version is
/// found. Returns whether a wipe happened.
pub(crate) fn ensure(conn: &Connection) -> Result<bool> {
    let found = version(conn)?;
    let reset = matches!(found, Some(v) if v != SCHEMA_VERSION);
    if reset {
        tracing::warn!("store schema version {found:?} != {SCHEMA_VERSION}; wiping for re-index");
        let tables: Vec<String> = conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%'")?
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<_>>()?;
        conn.execute_batch("PRAGMA foreign_keys = OFF;")?;
        for t in tables {
            conn.execute_batch(&format!("DROP TABLE IF EXISTS \"{}\"", t.replace('"', "")))?;
        }
        conn.execute_batch("PRAGMA foreign_keys = ON;")?;
    }
    conn.execute_batch(TABLES)?;
    conn.execute(
        "INSERT INTO meta(key, value) VALUES ('schema_version', ?1) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
        [SCHEMA_VERSION.to_string()],
    )?;
    create_indexes(conn)?;
    Ok(reset)
}
