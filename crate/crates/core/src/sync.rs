//! Incremental synchronization.
//!
//! Changed files are found by content hash (mtime and size only decide
//! whether a file is worth hashing). The engine keeps every file's parsed
//! extraction, rebuilds the graph a fresh index would produce, and writes
//! only the difference against the store in a single transaction. So a
//! synced store always equals a fresh index of the same tree.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeType, GraphNode};
use crate::lang::{FileExtraction, LanguageFilter};
use crate::pipeline::{self, BuildInputs, CoChange, ScanResult, ScannedFile};
use crate::store::{self, CanonicalEdge, Diagnostics, Store};

pub const POLL_MIN: Duration = Duration::from_millis(500);
pub const POLL_MAX: Duration = Duration::from_secs(8);

/// XXH3-64 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<u64> {
    Ok(pipeline::hash_bytes(&std::fs::read(path)?))
}

/// Adaptive polling interval: resets to the minimum after a change and
/// doubles (up to the maximum) after every quiet poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollSchedule {
    current: Duration,
}

impl Default for PollSchedule {
    fn default() -> Self {
        PollSchedule { current: POLL_MIN }
    }
}

impl PollSchedule {
    pub fn current(&self) -> Duration {
        self.current
    }

    pub fn next(&mut self, changed: bool) -> Duration {
        self.current = if changed { POLL_MIN } else { (self.current * 2).min(POLL_MAX) };
        self.current
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReport {
    /// Files whose content changed or that appeared.
    pub changed: Vec<String>,
    pub removed: Vec<String>,
    pub nodes_inserted: usize,
    pub nodes_updated: usize,
    pub nodes_deleted: usize,
    pub edges_inserted: usize,
    pub edges_updated: usize,
    pub edges_deleted: usize,
    pub micros: u64,
}

impl SyncReport {
    pub fn is_noop(&self) -> bool {
        self.changed.is_empty() && self.removed.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SyncConfig {
    pub repo_root: PathBuf,
    pub project: String,
    pub workers: usize,
    pub languages: LanguageFilter,
    pub ignore: Vec<String>,
    pub gamma: f64,
}

impl SyncConfig {
    pub fn from_pipeline(c: &pipeline::PipelineConfig) -> Self {
        SyncConfig {
            repo_root: c.repo_root.clone(),
            project: c.project_name(),
            workers: c.workers.max(1),
            languages: c.languages.clone(),
            ignore: c.ignore.clone(),
            gamma: c.gamma,
        }
    }
}

type Stamp = (Option<SystemTime>, u64);

/// The stored graph with row ids, kept in memory between syncs. Qualified
/// names are unique within a graph, so nodes are keyed by name alone and
/// edges by endpoint row ids.
#[derive(Default)]
struct Mirror {
    generation: u64,
    nodes: HashMap<String, (i64, GraphNode)>,
    edges: HashMap<(i64, i64, EdgeType), (i64, CanonicalEdge)>,
}

impl Mirror {
    fn load(store: &Store) -> Result<Mirror> {
        let conn = store.conn();
        let nodes = store::load_nodes(conn)?
            .into_iter()
            .map(|(id, n)| (n.qualified_name.clone(), (id, n)))
            .collect();
        let edges = store::load_edges(conn)?
            .into_iter()
            .map(|e| {
                (
                    (e.src, e.dst, e.edge_type),
                    (
                        e.id,
                        CanonicalEdge {
                            confidence: e.confidence,
                            properties: e.properties,
                        },
                    ),
                )
            })
            .collect();
        Ok(Mirror {
            generation: store.generation()?,
            nodes,
            edges,
        })
    }
}

pub struct SyncEngine {
    root: PathBuf,
    config: SyncConfig,
    files: BTreeMap<String, (u64, FileExtraction)>,
    stamps: HashMap<String, Stamp>,
    scan: ScanResult,
    cochange: Vec<CoChange>,
    diagnostics: BTreeMap<String, Diagnostics>,
    mirror: Mirror,
}

fn stamp(path: &Path) -> Option<Stamp> {
    let m = std::fs::metadata(path).ok()?;
    Some((m.modified().ok(), m.len()))
}

impl SyncEngine {
    /// Loads the engine from a store written by a fresh index.
    pub fn load(store: &Store, config: SyncConfig) -> Result<SyncEngine> {
        let root = config.repo_root.canonicalize()?;
        let files = store
            .cached_extractions()?
            .into_iter()
            .map(|(d, e)| (e.path.clone(), (d, e)))
            .collect();
        let cochange = store
            .meta(pipeline::META_COCHANGE)?
            .and_then(|j| serde_json::from_str(&j).ok())
            .unwrap_or_default();
        let scan = pipeline::scan_repo(&root, &config.languages, &config.ignore)?;
        let mut stamps = HashMap::new();
        for f in &scan.files {
            if let Some(s) = stamp(&root.join(&f.path)) {
                stamps.insert(f.path.clone(), s);
            }
        }
        Ok(SyncEngine {
            root,
            config,
            files,
            stamps,
            scan,
            cochange,
            diagnostics: store.diagnostics()?,
            mirror: Mirror::load(store)?,
        })
    }

    pub fn tracked_files(&self) -> usize {
        self.files.len()
    }

    /// Rescans the tree and syncs every added, changed or removed file.
    pub fn poll(&mut self, store: &mut Store) -> Result<SyncReport> {
        let started = Instant::now();
        let scan = pipeline::scan_repo(&self.root, &self.config.languages, &self.config.ignore)?;
        let structure_changed = scan.marker_dirs != self.scan.marker_dirs || scan.go_modules != self.scan.go_modules;
        let mut candidates = Vec::new();
        for f in &scan.files {
            let s = stamp(&self.root.join(&f.path));
            if s.is_none() || self.stamps.get(&f.path) != s.as_ref() || !self.files.contains_key(&f.path) {
                candidates.push(f.clone());
            }
        }
        let present: HashSet<&str> = scan.files.iter().map(|f| f.path.as_str()).collect();
        let removed: Vec<String> = self.files.keys().filter(|p| !present.contains(p.as_str())).cloned().collect();
        self.scan = scan;
        self.apply(store, candidates, removed, structure_changed, started)
    }

    /// Rebuilds the graph from the cached extractions even when no file
    /// changed, e.g. after new traces were stored.
    pub fn rebuild(&mut self, store: &mut Store) -> Result<SyncReport> {
        self.apply(store, Vec::new(), Vec::new(), true, Instant::now())
    }

    /// Syncs one repository-relative file (changed, added or deleted).
    pub fn reindex_file(&mut self, store: &mut Store, rel_path: &str) -> Result<SyncReport> {
        let started = Instant::now();
        let name = rel_path.rsplit('/').next().unwrap_or(rel_path);
        if pipeline::structure::PACKAGE_MARKERS.contains(&name) {
            return self.poll(store);
        }
        let exists = match crate::sanitize::validate_snippet_path(&self.root, rel_path) {
            Ok(p) => std::fs::symlink_metadata(self.root.join(rel_path))
                .is_ok_and(|m| m.is_file() && m.len() <= pipeline::MAX_FILE_BYTES) && p.is_file(),
            Err(Error::NotFound { .. }) => false,
            Err(e) => return Err(e),
        };
        if !exists || pipeline::path_ignored(rel_path, &self.config.ignore)? {
            let removed = if self.files.contains_key(rel_path) { vec![rel_path.to_string()] } else { Vec::new() };
            return self.apply(store, Vec::new(), removed, false, started);
        }
        let Some(language) = self.config.languages.detect(rel_path) else {
            return Ok(SyncReport::default());
        };
        let file = ScannedFile {
            path: rel_path.to_string(),
            language,
        };
        if !self.scan.files.iter().any(|f| f.path == rel_path) {
            self.scan.files.push(file.clone());
            self.scan.files.sort_by(|a, b| a.path.cmp(&b.path));
        }
        self.apply(store, vec![file], Vec::new(), false, started)
    }

    fn apply(
        &mut self,
        store: &mut Store,
        candidates: Vec<ScannedFile>,
        removed: Vec<String>,
        force_rebuild: bool,
        started: Instant,
    ) -> Result<SyncReport> {
        let mut report = SyncReport::default();
        let extracted = crate::par::map_ordered(self.config.workers, &candidates, |f| {
            (f.path.clone(), stamp(&self.root.join(&f.path)), pipeline::extract_one(&self.root, f))
        });
        let mut touched: Vec<(u64, FileExtraction)> = Vec::new();
        for (path, st, ext) in extracted {
            if let Some(s) = st {
                self.stamps.insert(path.clone(), s);
            }
            let Some((digest, ext)) = ext else { continue };
            // Hash gate: identical content is a no-op.
            if self.files.get(&path).is_some_and(|(d, _)| *d == digest) {
                continue;
            }
            report.changed.push(path);
            touched.push((digest, ext));
        }
        for path in &removed {
            self.files.remove(path);
            self.stamps.remove(path);
            self.scan.files.retain(|f| &f.path != path);
        }
        report.removed = removed;
        for (digest, ext) in &touched {
            self.files.insert(ext.path.clone(), (*digest, ext.clone()));
        }
        if report.is_noop() && !force_rebuild {
            report.micros = started.elapsed().as_micros() as u64;
            return Ok(report);
        }

        if store.generation()? != self.mirror.generation {
            self.mirror = Mirror::load(store)?;
        }
        let files: Vec<FileExtraction> = self.files.values().map(|(_, e)| e.clone()).collect();
        let traces = store.traces()?;
        let inputs = BuildInputs {
            project: self.config.project.clone(),
            marker_dirs: self.scan.marker_dirs.clone(),
            go_modules: self.scan.go_modules.clone(),
            cochange: &self.cochange,
            traces: &traces,
        };
        let built = pipeline::desired_graph(&files, &inputs, self.config.workers, self.config.gamma)?;
        let desired = &built.buffer;

        let tx = store.conn_mut().transaction()?;
        // Nodes that disappear or change label; their edges go with them.
        let stale_nodes: Vec<i64> = self
            .mirror
            .nodes
            .iter()
            .filter(|(q, (_, old))| desired.lookup(q).is_none_or(|t| desired.node(t).label != old.label))
            .map(|(_, (id, _))| *id)
            .collect();
        store::delete_nodes(&tx, &stale_nodes)?;
        report.nodes_deleted = stale_nodes.len();
        let gone: HashSet<i64> = stale_nodes.iter().copied().collect();
        self.mirror.nodes.retain(|_, (id, _)| !gone.contains(id));
        self.mirror.edges.retain(|(s, d, _), _| !gone.contains(s) && !gone.contains(d));

        // Row id of every desired node, indexed by temporary id.
        let mut rows: Vec<i64> = Vec::with_capacity(desired.node_count());
        for (_, node) in desired.nodes() {
            match self.mirror.nodes.get_mut(&node.qualified_name) {
                Some((id, old)) => {
                    if old != node {
                        store::update_node(&tx, *id, node)?;
                        *old = node.clone();
                        report.nodes_updated += 1;
                    }
                    rows.push(*id);
                }
                None => {
                    let id = store::insert_node(&tx, node)?;
                    self.mirror.nodes.insert(node.qualified_name.clone(), (id, node.clone()));
                    report.nodes_inserted += 1;
                    rows.push(id);
                }
            }
        }

        let mut seen: HashSet<i64> = HashSet::with_capacity(desired.edge_count());
        for e in desired.edges() {
            let key = (rows[e.src.0 as usize - 1], rows[e.dst.0 as usize - 1], e.edge_type);
            match self.mirror.edges.get_mut(&key) {
                Some((id, old)) => {
                    if old.confidence != e.confidence || old.properties != e.properties {
                        store::update_edge(&tx, *id, e.confidence, &e.properties)?;
                        old.confidence = e.confidence;
                        old.properties = e.properties.clone();
                        report.edges_updated += 1;
                    }
                    seen.insert(*id);
                }
                None => {
                    let id = store::insert_edge(&tx, key.0, key.1, key.2, e.confidence, &e.properties)?;
                    let edge = CanonicalEdge {
                        confidence: e.confidence,
                        properties: e.properties.clone(),
                    };
                    self.mirror.edges.insert(key, (id, edge));
                    seen.insert(id);
                    report.edges_inserted += 1;
                }
            }
        }
        let stale_edges: Vec<i64> =
            self.mirror.edges.values().map(|(id, _)| *id).filter(|id| !seen.contains(id)).collect();
        store::delete_edges(&tx, &stale_edges)?;
        report.edges_deleted = stale_edges.len();
        self.mirror.edges.retain(|_, (id, _)| seen.contains(id));

        for (digest, ext) in &touched {
            store::cache_put(&tx, *digest, ext)?;
            store::file_hash_put(&tx, &ext.path, *digest)?;
        }
        for path in &report.removed {
            store::cache_delete(&tx, path)?;
            store::file_hash_delete(&tx, path)?;
            tx.execute("DELETE FROM diagnostics WHERE file_path = ?1", [path])?;
            self.diagnostics.remove(path);
        }
        for (path, d) in &built.diagnostics {
            if self.diagnostics.get(path) != Some(d) {
                store::diagnostics_put(&tx, path, d)?;
                self.diagnostics.insert(path.clone(), d.clone());
            }
        }
        store::set_meta(&tx, "indexed_at", &store::now_secs().to_string())?;
        let generation = store::bump_generation(&tx)?;
        tx.commit()?;
        self.mirror.generation = generation;
        report.micros = started.elapsed().as_micros() as u64;
        Ok(report)
    }
}

/// Background polling loop. Owns the store while running; [`Watcher::stop`]
/// hands it back.
pub struct Watcher {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<(Store, SyncEngine)>>,
    pub last_report: Arc<Mutex<Option<SyncReport>>>,
}

impl Watcher {
    pub fn spawn(mut store: Store, mut engine: SyncEngine) -> Watcher {
        let stop = Arc::new(AtomicBool::new(false));
        let last_report = Arc::new(Mutex::new(None));
        let (flag, last) = (stop.clone(), last_report.clone());
        let handle = std::thread::spawn(move || {
            let mut schedule = PollSchedule::default();
            let mut wait = schedule.current();
            while !flag.load(Ordering::Acquire) {
                // Sleep in short slices so stop requests are prompt.
                let until = Instant::now() + wait;
                while Instant::now() < until && !flag.load(Ordering::Acquire) {
                    std::thread::sleep(Duration::from_millis(20).min(until - Instant::now()));
                }
                if flag.load(Ordering::Acquire) {
                    break;
                }
                let changed = match engine.poll(&mut store) {
                    Ok(r) => {
                        let changed = !r.is_noop();
                        if changed {
                            tracing::info!("synced {} changed, {} removed", r.changed.len(), r.removed.len());
                            if let Ok(mut l) = last.lock() {
                                *l = Some(r);
                            }
                        }
                        changed
                    }
                    Err(e) => {
                        tracing::warn!("sync failed: {e}");
                        false
                    }
                };
                wait = schedule.next(changed);
            }
            (store, engine)
        });
        Watcher {
            stop,
            handle: Some(handle),
            last_report,
        }
    }

    pub fn stop(self) -> Option<Store> {
        self.into_parts().map(|(store, _)| store)
    }

    /// Stops the loop and returns the store and the engine, so the caller
    /// can write and then resume watching without reloading.
    pub fn into_parts(mut self) -> Option<(Store, SyncEngine)> {
        self.stop.store(true, Ordering::Release);
        self.handle.take().and_then(|h| h.join().ok())
    }
}

impl Drop for Watcher {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
