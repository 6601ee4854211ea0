//! The six-phase indexing pipeline.
//!
//! 1. structure: Project, Folder/Package and File nodes.
//! 2. extraction: parallel parse of every file into definitions, calls,
//!    imports and usages, then definition nodes in per-worker buffers.
//! 3. resolution: registries are built once at a barrier, then each file
//!    resolves its calls and usages in parallel.
//! 4. enrichment: TESTS, routes, co-change, traces, IMPLEMENTS.
//! 5. flush: one transaction replaces the stored graph, indexes deferred.
//! 6. post-index: communities and file hashes.
//!
//! [`build_graph`] runs phases 1 to 4 over already-extracted files; the
//! incremental sync engine reuses it so both paths produce the same graph.

pub mod assemble;
pub mod enrich;
pub mod structure;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

use crate::community::{build_call_graph_from_buffer, louvain_partition, materialize, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::graph::{GraphBuffer, NodeLabel};
use crate::lang::{adapter, FileExtraction, LanguageFilter};
use crate::par;
use crate::resolve::types::TypeRegistry;
use crate::store::{self, Diagnostics, Store, TraceRecord};

pub use enrich::CoChange;
use structure::{phase_structure, StructureFile, PACKAGE_MARKERS};

/// Files larger than this are skipped; they are almost always generated.
pub const MAX_FILE_BYTES: u64 = 8 * 1024 * 1024;

/// Directories never descended into.
pub const ALWAYS_IGNORED: &[&str] = &[".git", ".hg", ".svn"];

pub const PHASES: [&str; 6] = ["structure", "extraction", "resolution", "enrichment", "flush", "post_index"];

/// Live progress of a pipeline run, shared with status reporters.
#[derive(Debug, Default)]
pub struct Progress {
    phase: Mutex<String>,
    files_total: AtomicUsize,
    files_done: AtomicUsize,
    finished: AtomicBool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    pub phase: String,
    pub files_total: usize,
    pub files_done: usize,
    pub percent: f64,
    pub finished: bool,
}

impl Progress {
    pub fn new() -> Arc<Progress> {
        Arc::new(Progress::default())
    }

    fn set_phase(&self, phase: &str) {
        if let Ok(mut p) = self.phase.lock() {
            *p = phase.to_string();
        }
    }

    fn file_done(&self) {
        self.files_done.fetch_add(1, Ordering::Relaxed);
    }

    fn finish(&self) {
        self.finished.store(true, Ordering::Release);
    }

    /// Percent is weighted by phase, with extraction advancing per file.
    pub fn snapshot(&self) -> ProgressSnapshot {
        let phase = self.phase.lock().map(|p| p.clone()).unwrap_or_default();
        let total = self.files_total.load(Ordering::Relaxed);
        let done = self.files_done.load(Ordering::Relaxed).min(total);
        let finished = self.finished.load(Ordering::Acquire);
        let idx = PHASES.iter().position(|p| *p == phase);
        let percent = if finished {
            100.0
        } else {
            match idx {
                None => 0.0,
                Some(1) if total > 0 => (100.0 / 6.0) * (1.0 + done as f64 / total as f64),
                Some(i) => 100.0 * i as f64 / 6.0,
            }
        };
        ProgressSnapshot {
            phase: if finished { "done".to_string() } else { phase },
            files_total: total,
            files_done: done,
            percent,
            finished,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub repo_root: PathBuf,
    /// Defaults to the repository directory name.
    pub project: Option<String>,
    pub workers: usize,
    pub languages: LanguageFilter,
    /// Extra glob patterns (matched against repository-relative paths)
    /// to skip.
    pub ignore: Vec<String>,
    pub gamma: f64,
    /// Read version-control history for co-change edges.
    pub cochange: bool,
    pub progress: Option<Arc<Progress>>,
}

impl PipelineConfig {
    pub fn new(repo_root: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            repo_root: repo_root.into(),
            project: None,
            workers: par::default_workers(),
            languages: LanguageFilter::from_env(),
            ignore: Vec::new(),
            gamma: DEFAULT_GAMMA,
            cochange: true,
            progress: None,
        }
    }

    pub fn project_name(&self) -> String {
        if let Some(p) = &self.project {
            return p.clone();
        }
        let root = self.repo_root.canonicalize().unwrap_or_else(|_| self.repo_root.clone());
        root.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "root".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub project: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub file_count: usize,
    pub unresolved_call_count: u64,
    pub community_count: usize,
    pub phase_durations: Vec<PhaseTiming>,
}

impl IndexSummary {
    pub fn total(&self) -> Duration {
        Duration::from_secs_f64(self.phase_durations.iter().map(|p| p.millis).sum::<f64>() / 1000.0)
    }
}

/// One source file found by the scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedFile {
    /// Repository-relative, `/`-separated.
    pub path: String,
    pub language: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    /// Sorted by path.
    pub files: Vec<ScannedFile>,
    /// Directories holding a package marker file.
    pub marker_dirs: BTreeSet<String>,
    /// (directory, module path) for every `go.mod`.
    pub go_modules: Vec<(String, String)>,
}

fn ignore_set(patterns: &[String]) -> Result<GlobSet> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).map_err(|e| Error::Pattern(e.to_string()))?);
    }
    b.build().map_err(|e| Error::Pattern(e.to_string()))
}

/// Whether the scan would skip `rel` because of an ignored directory or
/// glob.
pub fn path_ignored(rel: &str, ignore: &[String]) -> Result<bool> {
    let mut segments: Vec<&str> = rel.split('/').collect();
    segments.pop();
    if segments.iter().any(|s| ALWAYS_IGNORED.contains(s)) {
        return Ok(true);
    }
    Ok(ignore_set(ignore)?.is_match(rel))
}

fn go_module_path(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("module "))
        .map(|m| m.trim().trim_matches('"').to_string())
        .filter(|m| !m.is_empty())
}

/// Walks the repository. Symbolic links are not followed, so nothing
/// outside the root is ever read.
pub fn scan_repo(root: &Path, languages: &LanguageFilter, ignore: &[String]) -> Result<ScanResult> {
    if !root.is_dir() {
        return Err(Error::NotFound {
            what: format!("repository directory {}", root.display()),
            suggestions: Vec::new(),
        });
    }
    let ignored = ignore_set(ignore)?;
    let mut out = ScanResult::default();
    let walker = walkdir::WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0 || !(e.file_type().is_dir() && ALWAYS_IGNORED.iter().any(|d| e.file_name() == *d))
        });
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                tracing::warn!("scan: {err}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else { continue };
        let rel: String = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if ignored.is_match(&rel) {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        let dir = rel.rsplit_once('/').map(|(d, _)| d.to_string()).unwrap_or_default();
        if PACKAGE_MARKERS.contains(&name.as_ref()) && !dir.is_empty() {
            out.marker_dirs.insert(dir.clone());
        }
        if name == "go.mod" {
            if let Some(m) = std::fs::read_to_string(entry.path()).ok().as_deref().and_then(go_module_path) {
                out.go_modules.push((dir, m));
            }
            continue;
        }
        let Some(language) = languages.detect(&rel) else { continue };
        if entry.metadata().map(|m| m.len() > MAX_FILE_BYTES).unwrap_or(true) {
            tracing::warn!("skipping {rel}: larger than {MAX_FILE_BYTES} bytes");
            continue;
        }
        out.files.push(ScannedFile { path: rel, language });
    }
    out.files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Content hash used for change detection.
pub fn hash_bytes(content: &[u8]) -> u64 {
    xxhash_rust::xxh3::xxh3_64(content)
}

/// Reads, hashes and parses one file. `None` when unreadable.
pub fn extract_one(root: &Path, file: &ScannedFile) -> Option<(u64, FileExtraction)> {
    let adapter = adapter(file.language)?;
    match std::fs::read(root.join(&file.path)) {
        Ok(content) => Some((hash_bytes(&content), crate::lang::extract_file(&file.path, &content, adapter))),
        Err(err) => {
            tracing::warn!("skipping {}: {err}", file.path);
            None
        }
    }
}

/// Inputs to graph construction beyond the parsed files.
#[derive(Debug, Clone, Default)]
pub struct BuildInputs<'a> {
    pub project: String,
    pub marker_dirs: BTreeSet<String>,
    pub go_modules: Vec<(String, String)>,
    pub cochange: &'a [CoChange],
    pub traces: &'a [TraceRecord],
}

/// Result of phases 1 to 4.
pub struct BuiltGraph {
    pub buffer: GraphBuffer,
    /// Per-file resolution counters in file order.
    pub diagnostics: Vec<(String, Diagnostics)>,
    pub types: Option<TypeRegistry>,
}

impl BuiltGraph {
    pub fn unresolved_calls(&self) -> u64 {
        self.diagnostics.iter().map(|(_, d)| d.unresolved_calls).sum()
    }
}

fn timed<T>(timings: &mut Vec<PhaseTiming>, phase: &str, progress: Option<&Progress>, f: impl FnOnce() -> T) -> T {
    if let Some(p) = progress {
        p.set_phase(phase);
    }
    let start = Instant::now();
    let out = f();
    let millis = start.elapsed().as_secs_f64() * 1000.0;
    match timings.iter_mut().find(|t| t.phase == phase) {
        Some(t) => t.millis += millis,
        None => timings.push(PhaseTiming {
            phase: phase.to_string(),
            millis,
        }),
    }
    out
}

fn build_phases(
    files: &[FileExtraction],
    inputs: &BuildInputs<'_>,
    workers: usize,
    timings: &mut Vec<PhaseTiming>,
    progress: Option<&Progress>,
) -> Result<BuiltGraph> {
    let base = timed(timings, "structure", progress, || {
        let entries: Vec<StructureFile<'_>> = files
            .iter()
            .map(|f| StructureFile {
                path: &f.path,
                language: &f.language,
                module: &f.module_qname,
            })
            .collect();
        phase_structure(&inputs.project, &inputs.marker_dirs, &entries)
    })?;
    let (base, claims) = timed(timings, "extraction", progress, || {
        let claims = assemble::claim_definitions(files);
        assemble::definition_nodes(base, files, &claims, workers).map(|b| (b, claims))
    })?;
    let (mut buffer, diagnostics, types) = timed(timings, "resolution", progress, || -> Result<_> {
        let resolver = assemble::build_resolver(files, &claims, &inputs.go_modules);
        let parts = assemble::resolve_all(&base, files, &claims, &resolver, workers)?;
        let mut diagnostics = Vec::with_capacity(files.len());
        let mut buffers = vec![base];
        for p in parts {
            diagnostics.extend(p.diagnostics);
            buffers.push(p.buffer);
        }
        Ok((crate::graph::buffer_merge(buffers)?, diagnostics, resolver.typed))
    })?;
    timed(timings, "enrichment", progress, || -> Result<()> {
        enrich::tests_edges(&mut buffer)?;
        enrich::route_edges(&mut buffer, files, &claims)?;
        enrich::cochange_edges(&mut buffer, inputs.cochange)?;
        enrich::trace_edges(&mut buffer, inputs.traces)?;
        enrich::implements_edges(&mut buffer, types.as_ref())?;
        Ok(())
    })?;
    Ok(BuiltGraph {
        buffer,
        diagnostics,
        types,
    })
}

/// Phases 1 to 4 over `files`, which must be sorted by path.
pub fn build_graph(files: &[FileExtraction], inputs: &BuildInputs<'_>, workers: usize) -> Result<BuiltGraph> {
    build_phases(files, inputs, workers, &mut Vec::new(), None)
}

/// Adds Community nodes and MEMBER_OF edges for the call graph in
/// `buffer`. Returns the number of communities.
pub fn add_communities(buffer: &mut GraphBuffer, gamma: f64) -> Result<usize> {
    let g = build_call_graph_from_buffer(buffer);
    if g.is_empty() {
        return Ok(0);
    }
    let p = louvain_partition(&g, gamma);
    materialize(buffer, &g, &p)
}

/// The full graph a fresh index of these inputs would store.
pub fn desired_graph(
    files: &[FileExtraction],
    inputs: &BuildInputs<'_>,
    workers: usize,
    gamma: f64,
) -> Result<BuiltGraph> {
    let mut built = build_graph(files, inputs, workers)?;
    add_communities(&mut built.buffer, gamma)?;
    Ok(built)
}

pub(crate) const META_COCHANGE: &str = "cochange";
pub(crate) const META_GAMMA: &str = "gamma";

/// Runs all six phases against `store`, replacing whatever it held.
pub fn run_pipeline(config: &PipelineConfig, store: &mut Store) -> Result<IndexSummary> {
    let progress = config.progress.as_deref();
    let root = config.repo_root.canonicalize().map_err(|_| Error::NotFound {
        what: format!("repository directory {}", config.repo_root.display()),
        suggestions: Vec::new(),
    })?;
    let project = config.project_name();
    let workers = config.workers.max(1);
    let mut timings = Vec::new();

    let scan = timed(&mut timings, "structure", progress, || {
        scan_repo(&root, &config.languages, &config.ignore)
    })?;
    if let Some(p) = progress {
        p.files_total.store(scan.files.len(), Ordering::Relaxed);
    }
    let extracted: Vec<(u64, FileExtraction)> = timed(&mut timings, "extraction", progress, || {
        par::map_ordered(workers, &scan.files, |f| {
            let r = extract_one(&root, f);
            if let Some(p) = progress {
                p.file_done();
            }
            r
        })
        .into_iter()
        .flatten()
        .collect()
    });
    let (digests, files): (Vec<u64>, Vec<FileExtraction>) = extracted.into_iter().unzip();
    let cochange = timed(&mut timings, "enrichment", progress, || {
        if config.cochange {
            enrich::git_cochange(&root)
        } else {
            Vec::new()
        }
    });
    let traces = store.traces()?;
    let inputs = BuildInputs {
        project: project.clone(),
        marker_dirs: scan.marker_dirs,
        go_modules: scan.go_modules,
        cochange: &cochange,
        traces: &traces,
    };
    let mut built = build_phases(&files, &inputs, workers, &mut timings, progress)?;

    let (mut ids, flushed_edges) = timed(&mut timings, "flush", progress, || -> Result<_> {
        let tx = store.conn_mut().transaction()?;
        let ids = store::flush_buffer(&tx, &built.buffer)?;
        tx.execute_batch("DELETE FROM file_cache; DELETE FROM diagnostics; DELETE FROM file_hashes;")?;
        for (digest, ext) in digests.iter().zip(&files) {
            store::cache_put(&tx, *digest, ext)?;
        }
        for (path, d) in &built.diagnostics {
            store::diagnostics_put(&tx, path, d)?;
        }
        store::set_meta(&tx, "project", &project)?;
        store::set_meta(&tx, "repo_root", &root.to_string_lossy())?;
        store::set_meta(&tx, META_COCHANGE, &serde_json::to_string(&cochange)?)?;
        store::set_meta(&tx, META_GAMMA, &config.gamma.to_string())?;
        tx.commit()?;
        Ok((ids, built.buffer.edge_count()))
    })?;

    let community_count = timed(&mut timings, "post_index", progress, || -> Result<usize> {
        let first_new_node = built.buffer.node_count();
        let count = add_communities(&mut built.buffer, config.gamma)?;
        let tx = store.conn_mut().transaction()?;
        for (id, node) in built.buffer.nodes().skip(first_new_node) {
            debug_assert_eq!(id.0 as usize, ids.len() + 1);
            ids.push(store::insert_node(&tx, node)?);
        }
        for e in &built.buffer.edges()[flushed_edges..] {
            let row = |t: crate::graph::TempId| ids[t.0 as usize - 1];
            store::insert_edge(&tx, row(e.src), row(e.dst), e.edge_type, e.confidence, &e.properties)?;
        }
        for (digest, ext) in digests.iter().zip(&files) {
            store::file_hash_put(&tx, &ext.path, *digest)?;
        }
        store::set_meta(&tx, "indexed_at", &store::now_secs().to_string())?;
        store::bump_generation(&tx)?;
        tx.commit()?;
        Ok(count)
    })?;
    if let Some(p) = progress {
        p.finish();
    }

    let mut phase_durations = Vec::with_capacity(PHASES.len());
    for phase in PHASES {
        let millis = timings.iter().find(|t| t.phase == phase).map_or(0.0, |t| t.millis);
        phase_durations.push(PhaseTiming {
            phase: phase.to_string(),
            millis,
        });
    }
    Ok(IndexSummary {
        project,
        node_count: built.buffer.node_count(),
        edge_count: built.buffer.edge_count(),
        file_count: files.len(),
        unresolved_call_count: built.unresolved_calls(),
        community_count,
        phase_durations,
    })
}

/// Opens (creating if needed) the default store for `config.repo_root`
/// and indexes into it.
pub fn index_repository(config: &PipelineConfig, db: Option<&Path>) -> Result<IndexSummary> {
    let path = match db {
        Some(p) => p.to_path_buf(),
        None => store::default_store_path(&config.repo_root),
    };
    let mut store = Store::open(path, store::OpenMode::ReadWrite)?;
    run_pipeline(config, &mut store)
}

/// Number of nodes with `label` in a built graph.
pub fn label_count(buffer: &GraphBuffer, label: NodeLabel) -> usize {
    buffer.with_label(label).len()
}
