//! Tool handlers. Arguments arrive already validated against the tool's
//! schema; handlers only apply semantic checks.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::community::DEFAULT_GAMMA;
use crate::error::{Error, Result};
use crate::lang::{adapter, LanguageFilter};
use crate::pipeline::{self, IndexSummary, PipelineConfig, Progress};
use crate::query::{self, TraceDirection};
use crate::sanitize::{validate_shell_arg, validate_snippet_path};
use crate::store::{self, OpenMode, Store, TraceRecord};
use crate::sync::{SyncConfig, SyncEngine, Watcher};

/// Environment variable holding the repository allow-list, in the
/// platform's `PATH` syntax.
pub const ALLOWED_ROOTS_ENV: &str = "CODEGRAPH_ALLOWED_ROOTS";
const DEFAULT_LIMIT: usize = 50;
const DEFAULT_DEPTH: u32 = 3;
const MAX_SNIPPET_LINES: u32 = 2000;
const MAX_TRACE_LINES: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Repository used when a call omits `repo_root`.
    pub root: PathBuf,
    /// Store override; otherwise each repository gets its own store under
    /// the data directory.
    pub db: Option<PathBuf>,
    /// When set, only repositories under one of these directories are
    /// served.
    pub allowed_roots: Option<Vec<PathBuf>>,
    pub workers: usize,
    /// Default for `index_repository`'s `watch` argument.
    pub watch: bool,
}

impl ServerConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ServerConfig {
            root: root.into(),
            db: None,
            allowed_roots: None,
            workers: crate::par::default_workers(),
            watch: false,
        }
    }

    /// Reads the allow-list from the environment.
    pub fn from_env(root: impl Into<PathBuf>) -> Self {
        let mut c = ServerConfig::new(root);
        if let Some(v) = std::env::var_os(ALLOWED_ROOTS_ENV).filter(|v| !v.is_empty()) {
            c.allowed_roots = Some(std::env::split_paths(&v).filter(|p| !p.as_os_str().is_empty()).collect());
        }
        c
    }
}

type JobOutput = Result<(IndexSummary, Option<Watcher>)>;

struct Job {
    progress: Arc<Progress>,
    handle: JoinHandle<JobOutput>,
}

enum Outcome {
    Completed(IndexSummary),
    Failed { kind: &'static str, message: String },
}

#[derive(Default)]
struct ProjectState {
    job: Option<Job>,
    last_progress: Option<Arc<Progress>>,
    outcome: Option<Outcome>,
    watcher: Option<Watcher>,
}

impl ProjectState {
    /// Collects a finished job, adopting the watcher it started.
    fn reap(&mut self) {
        if !self.job.as_ref().is_some_and(|j| j.handle.is_finished()) {
            return;
        }
        let job = self.job.take().expect("checked above");
        self.last_progress = Some(job.progress);
        self.outcome = Some(match job.handle.join() {
            Ok(Ok((summary, watcher))) => {
                self.watcher = watcher;
                Outcome::Completed(summary)
            }
            Ok(Err(e)) => Outcome::Failed {
                kind: e.kind(),
                message: e.to_string(),
            },
            Err(_) => Outcome::Failed {
                kind: "internal",
                message: "indexing thread panicked".to_string(),
            },
        });
    }

    fn wait(&mut self) {
        if let Some(job) = &self.job {
            while !job.handle.is_finished() {
                std::thread::sleep(std::time::Duration::from_millis(5));
            }
        }
        self.reap();
    }

    fn running(&mut self) -> bool {
        self.reap();
        self.job.is_some()
    }
}

pub(crate) struct Tools {
    config: ServerConfig,
    projects: HashMap<PathBuf, ProjectState>,
}

#[derive(Deserialize)]
struct TraceLine {
    caller_qname: String,
    callee_qname: String,
    #[serde(default = "one")]
    count: u64,
}

fn one() -> u64 {
    1
}

fn str_arg<'a>(args: &'a Value, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str)
}

fn u64_arg(args: &Value, key: &str) -> Option<u64> {
    args.get(key).and_then(Value::as_u64)
}

fn bool_arg(args: &Value, key: &str) -> Option<bool> {
    args.get(key).and_then(Value::as_bool)
}

fn strings_arg(args: &Value, key: &str) -> Option<Vec<String>> {
    args.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn busy(db: &Path) -> Error {
    Error::Busy { path: db.to_path_buf() }
}

impl Tools {
    pub(crate) fn new(config: ServerConfig) -> Tools {
        Tools {
            config,
            projects: HashMap::new(),
        }
    }

    pub(crate) fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub(crate) fn shutdown(&mut self) {
        for state in self.projects.values_mut() {
            state.wait();
            if let Some(w) = state.watcher.take() {
                w.stop();
            }
        }
    }

    /// Starts watching the server root if it has been indexed. Catches up
    /// on edits made since the last run first.
    pub(crate) fn start_watch(&mut self) -> Result<bool> {
        let root = self.resolve_root(&Value::Null)?;
        let db = self.db_path(&root);
        if !db.exists() {
            return Ok(false);
        }
        let workers = self.config.workers.max(1);
        let state = self.projects.entry(root.clone()).or_default();
        if state.watcher.is_some() {
            return Ok(true);
        }
        if state.running() {
            return Err(busy(&db));
        }
        let mut store = Store::open(&db, OpenMode::ReadWrite)?;
        let mut engine = SyncEngine::load(&store, stored_sync_config(&store, root, workers)?)?;
        engine.poll(&mut store)?;
        state.watcher = Some(Watcher::spawn(store, engine));
        Ok(true)
    }

    pub(crate) fn call(&mut self, name: &str, args: &Value) -> Result<Value> {
        match name {
            "list_projects" => return self.list_projects(),
            "index_repository" => return self.index_repository(args),
            _ => {}
        }
        let root = self.resolve_root(args)?;
        match name {
            "index_status" => self.index_status(&root),
            "delete_project" => self.delete_project(&root),
            "search_graph" => {
                let store = self.open_read(&root)?;
                let limit = u64_arg(args, "limit").map_or(DEFAULT_LIMIT, |v| v as usize);
                let pattern = str_arg(args, "pattern").unwrap_or_default();
                let hits = query::search_symbols(store.conn(), pattern, str_arg(args, "label"), limit)?;
                Ok(json!({"results": hits}))
            }
            "trace_call_path" => {
                let store = self.open_read(&root)?;
                let direction: TraceDirection = str_arg(args, "direction").unwrap_or("outbound").parse()?;
                let depth = u64_arg(args, "depth").map_or(DEFAULT_DEPTH, |v| v as u32);
                let qname = str_arg(args, "function_name").unwrap_or_default();
                to_json(&query::trace_call_path(store.conn(), qname, direction, depth)?)
            }
            "query_graph" => {
                let store = self.open_read(&root)?;
                to_json(&query::execute_query(store.conn(), str_arg(args, "query").unwrap_or_default())?)
            }
            "ingest_traces" => self.ingest_traces(&root, str_arg(args, "traces").unwrap_or_default()),
            "detect_changes" => self.detect_changes(&root, args),
            "get_graph_schema" => {
                let store = self.open_read(&root)?;
                to_json(&query::graph_schema(store.conn())?)
            }
            "get_architecture" => {
                let store = self.open_read(&root)?;
                let k = u64_arg(args, "hubs").map_or(query::DEFAULT_HUBS, |v| v as usize);
                Ok(json!({
                    "architecture": query::architecture_summary(store.conn(), k)?,
                    "hubs": query::top_hubs(store.conn(), k)?,
                }))
            }
            "get_code_snippet" => self.code_snippet(&root, args),
            "search_code" => {
                let store = self.open_read(&root)?;
                let limit = u64_arg(args, "limit").map_or(DEFAULT_LIMIT, |v| v as usize);
                let regex = bool_arg(args, "regex").unwrap_or(false);
                let pattern = str_arg(args, "pattern").unwrap_or_default();
                let matches = query::search_code(store.conn(), &root, pattern, regex, limit)?;
                Ok(json!({"matches": matches}))
            }
            "manage_adr" => self.manage_adr(&root, args),
            _ => Err(Error::validation(format!("unknown tool {name:?}"))),
        }
    }

    /// Canonical repository directory named by `repo_root` (or the server
    /// root), subject to the allow-list.
    fn resolve_root(&self, args: &Value) -> Result<PathBuf> {
        let requested = match str_arg(args, "repo_root") {
            Some(r) if r.contains('\0') => return Err(Error::Containment),
            Some(r) => PathBuf::from(r),
            None => self.config.root.clone(),
        };
        let root = requested
            .canonicalize()
            .ok()
            .filter(|p| p.is_dir())
            .ok_or_else(|| Error::NotFound {
                what: "repository directory".to_string(),
                suggestions: Vec::new(),
            })?;
        if let Some(allowed) = &self.config.allowed_roots {
            let ok = allowed
                .iter()
                .filter_map(|a| a.canonicalize().ok())
                .any(|a| root.starts_with(&a));
            if !ok {
                return Err(Error::Containment);
            }
        }
        Ok(root)
    }

    fn db_path(&self, root: &Path) -> PathBuf {
        self.config.db.clone().unwrap_or_else(|| store::default_store_path(root))
    }

    fn open_read(&self, root: &Path) -> Result<Store> {
        Store::open(self.db_path(root), OpenMode::ReadOnly).map_err(|e| match e {
            Error::NotFound { what, .. } => Error::NotFound {
                what,
                suggestions: vec!["call index_repository first".to_string()],
            },
            e => e,
        })
    }

    /// Runs `f` with the single writable handle. A running watcher is
    /// paused for the duration and handed its engine; otherwise the store
    /// is opened here.
    fn with_writer<T>(
        &mut self,
        root: &Path,
        f: impl FnOnce(&mut Store, Option<&mut SyncEngine>) -> Result<T>,
    ) -> Result<T> {
        let db = self.db_path(root);
        let state = self.projects.entry(root.to_path_buf()).or_default();
        if state.running() {
            return Err(busy(&db));
        }
        match state.watcher.take().and_then(Watcher::into_parts) {
            Some((mut store, mut engine)) => {
                let out = f(&mut store, Some(&mut engine));
                state.watcher = Some(Watcher::spawn(store, engine));
                out
            }
            None => {
                let mut store = Store::open(&db, OpenMode::ReadWrite)?;
                f(&mut store, None)
            }
        }
    }

    fn list_projects(&self) -> Result<Value> {
        let mut projects = store::list_projects(&store::data_dir())?;
        if let Some(db) = self.config.db.as_ref().filter(|p| p.exists()) {
            let info = Store::open(db, OpenMode::ReadOnly).and_then(|s| store::project_info(&s))?;
            if !projects.iter().any(|p| p.store_path == info.store_path) {
                projects.push(info);
            }
        }
        Ok(json!({"projects": projects}))
    }

    fn index_repository(&mut self, args: &Value) -> Result<Value> {
        let root = self.resolve_root(args)?;
        let db = self.db_path(&root);
        let mut cfg = PipelineConfig::new(&root);
        cfg.workers = self.config.workers.max(1);
        cfg.project = str_arg(args, "project").map(str::to_string);
        if let Some(langs) = strings_arg(args, "languages") {
            if let Some(bad) = langs.iter().find(|l| adapter(l).is_none()) {
                let short: String = bad.chars().take(64).collect();
                return Err(Error::validation(format!("unsupported language {short:?}")));
            }
            cfg.languages = LanguageFilter(Some(langs));
        }
        if let Some(ignore) = strings_arg(args, "ignore") {
            cfg.ignore = ignore;
        }
        cfg.cochange = bool_arg(args, "cochange").unwrap_or(true);
        let watch = bool_arg(args, "watch").unwrap_or(self.config.watch);
        let wait = bool_arg(args, "wait").unwrap_or(false);
        // Validate ignore globs before going to the background.
        pipeline::path_ignored("", &cfg.ignore)?;

        let state = self.projects.entry(root.clone()).or_default();
        if state.running() {
            return Err(busy(&db));
        }
        if let Some(w) = state.watcher.take() {
            w.stop();
        }
        let progress = Progress::new();
        cfg.progress = Some(progress.clone());
        let project = cfg.project_name();
        let handle = std::thread::spawn(move || -> JobOutput {
            let mut store = Store::open(&db, OpenMode::ReadWrite)?;
            let summary = pipeline::run_pipeline(&cfg, &mut store)?;
            let watcher = if watch {
                let engine = SyncEngine::load(&store, SyncConfig::from_pipeline(&cfg))?;
                Some(Watcher::spawn(store, engine))
            } else {
                None
            };
            Ok((summary, watcher))
        });
        state.job = Some(Job { progress, handle });
        state.outcome = None;
        if !wait {
            return Ok(json!({"status": "started", "project": project, "repo_root": root, "watch": watch}));
        }
        state.wait();
        match &state.outcome {
            Some(Outcome::Completed(summary)) => {
                Ok(json!({"status": "completed", "project": project, "repo_root": root, "watch": watch, "summary": summary}))
            }
            Some(Outcome::Failed { message, .. }) => Err(Error::validation(format!("indexing failed: {message}"))),
            None => Err(Error::validation("indexing did not finish")),
        }
    }

    fn index_status(&mut self, root: &Path) -> Result<Value> {
        let stored = self.open_read(root).and_then(|s| store::project_info(&s)).ok();
        let state = self.projects.entry(root.to_path_buf()).or_default();
        state.reap();
        let (status, progress) = match (&state.job, &state.outcome) {
            (Some(job), _) => ("running", Some(job.progress.snapshot())),
            (None, Some(Outcome::Completed(_))) => ("completed", state.last_progress.as_ref().map(|p| p.snapshot())),
            (None, Some(Outcome::Failed { .. })) => ("failed", state.last_progress.as_ref().map(|p| p.snapshot())),
            (None, None) if stored.is_some() => ("indexed", None),
            (None, None) => ("not_indexed", None),
        };
        let mut out = json!({
            "repo_root": root,
            "status": status,
            "progress": progress,
            "watching": state.watcher.is_some(),
            "stored": stored,
        });
        match &state.outcome {
            Some(Outcome::Completed(s)) => out["summary"] = to_json(s)?,
            Some(Outcome::Failed { kind, message }) => out["error"] = json!({"kind": kind, "message": message}),
            None => {}
        }
        if let Some(report) = state.watcher.as_ref().and_then(|w| w.last_report.lock().ok().and_then(|r| r.clone())) {
            out["last_sync"] = to_json(&report)?;
        }
        Ok(out)
    }

    fn delete_project(&mut self, root: &Path) -> Result<Value> {
        let db = self.db_path(root);
        if let Some(state) = self.projects.get_mut(root) {
            if state.running() {
                return Err(busy(&db));
            }
            if let Some(w) = state.watcher.take() {
                w.stop();
            }
        }
        self.projects.remove(root);
        let deleted = store::delete_store(&db)?;
        Ok(json!({"deleted": deleted, "repo_root": root}))
    }

    fn ingest_traces(&mut self, root: &Path, payload: &str) -> Result<Value> {
        let mut records = Vec::new();
        for (i, line) in payload.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if records.len() >= MAX_TRACE_LINES {
                return Err(Error::validation(format!("more than {MAX_TRACE_LINES} trace records")));
            }
            let t: TraceLine = serde_json::from_str(line)
                .map_err(|e| Error::validation(format!("trace line {}: {e}", i + 1)))?;
            if t.caller_qname.is_empty() || t.callee_qname.is_empty() || t.count == 0 || t.count > i64::MAX as u64 {
                return Err(Error::validation(format!(
                    "trace line {}: names must be non-empty and count positive",
                    i + 1
                )));
            }
            records.push(TraceRecord {
                caller_qname: t.caller_qname,
                callee_qname: t.callee_qname,
                count: t.count,
            });
        }
        let root_buf = root.to_path_buf();
        let workers = self.config.workers.max(1);
        let report = self.with_writer(root, |store, engine| {
            store.traces_add(&records)?;
            match engine {
                Some(engine) => engine.rebuild(store),
                None => {
                    let mut engine = SyncEngine::load(store, stored_sync_config(store, root_buf, workers)?)?;
                    engine.rebuild(store)
                }
            }
        })?;
        let store = self.open_read(root)?;
        let matched = records
            .iter()
            .filter(|r| {
                let exists = |q: &str| query::find_symbol(store.conn(), q).ok().flatten().is_some();
                exists(&r.caller_qname) && exists(&r.callee_qname)
            })
            .count();
        let runtime_edges: i64 = store.conn().query_row(
            "SELECT COUNT(*) FROM edges WHERE type = 'CALLS' AND json_extract(properties, '$.runtime_observed') = 'true'",
            [],
            |r| r.get(0),
        )?;
        Ok(json!({
            "ingested": records.len(),
            "matched": matched,
            "runtime_edges": runtime_edges,
            "edges_inserted": report.edges_inserted,
            "edges_updated": report.edges_updated,
        }))
    }

    fn detect_changes(&self, root: &Path, args: &Value) -> Result<Value> {
        let depth = u64_arg(args, "depth").map_or(DEFAULT_DEPTH, |v| v as u32);
        let changed = match strings_arg(args, "files") {
            Some(files) => files,
            None => git_changed_files(root, str_arg(args, "base").unwrap_or("HEAD"))?,
        };
        let store = self.open_read(root)?;
        let report = query::impact_analysis(store.conn(), &changed, depth)?;
        Ok(json!({"changed_files": changed, "impact": report}))
    }

    fn code_snippet(&self, root: &Path, args: &Value) -> Result<Value> {
        let store = self.open_read(root)?;
        let (file, mut start, mut end, symbol) = match str_arg(args, "qualified_name") {
            Some(q) => {
                let n = query::find_symbol(store.conn(), q)?.ok_or_else(|| Error::NotFound {
                    what: "symbol".to_string(),
                    suggestions: query::suggestions(store.conn(), q, 5).unwrap_or_default(),
                })?;
                (n.file_path.clone(), n.start_line.max(1), n.end_line.max(1), Some(n))
            }
            None => {
                let f = str_arg(args, "file_path")
                    .ok_or_else(|| Error::validation("either qualified_name or file_path is required"))?;
                (f.to_string(), 1, u32::MAX, None)
            }
        };
        if let Some(s) = u64_arg(args, "start_line") {
            start = s as u32;
        }
        if let Some(e) = u64_arg(args, "end_line") {
            end = e as u32;
        }
        if end < start {
            return Err(Error::validation("end_line is before start_line"));
        }
        let path = validate_snippet_path(root, &file)?;
        let meta = std::fs::metadata(&path)?;
        if !meta.is_file() || meta.len() > pipeline::MAX_FILE_BYTES {
            return Err(Error::validation("not a regular source file within the size limit"));
        }
        let text = String::from_utf8_lossy(&std::fs::read(&path)?).into_owned();
        let last = end.min(start.saturating_add(MAX_SNIPPET_LINES - 1));
        let lines: Vec<&str> = text
            .lines()
            .skip(start as usize - 1)
            .take((last - start + 1) as usize)
            .collect();
        let shown_end = start + lines.len().saturating_sub(1) as u32;
        Ok(json!({
            "file_path": file,
            "start_line": start,
            "end_line": shown_end,
            "truncated": last < end && lines.len() as u32 == MAX_SNIPPET_LINES,
            "symbol": symbol,
            "text": lines.join("\n"),
        }))
    }

    fn manage_adr(&mut self, root: &Path, args: &Value) -> Result<Value> {
        match str_arg(args, "action").unwrap_or_default() {
            "create" => {
                let title = str_arg(args, "title").ok_or_else(|| Error::validation("title is required"))?.to_string();
                let status = str_arg(args, "status").unwrap_or("proposed").to_string();
                let body = str_arg(args, "body").unwrap_or_default().to_string();
                let adr = self.with_writer(root, |store, _| store.adr_create(&title, &status, &body))?;
                Ok(json!({"adr": adr}))
            }
            "list" => Ok(json!({"adrs": self.open_read(root)?.adr_list()?})),
            "get" => {
                let id = u64_arg(args, "id").ok_or_else(|| Error::validation("id is required"))?;
                Ok(json!({"adr": self.open_read(root)?.adr_get(id as i64)?}))
            }
            other => Err(Error::validation(format!("unknown action {other:?}"))),
        }
    }
}

/// Sync settings for a store written by an earlier index run.
fn stored_sync_config(store: &Store, root: PathBuf, workers: usize) -> Result<SyncConfig> {
    let project = store.meta("project")?.unwrap_or_else(|| "root".to_string());
    let gamma = store
        .meta(pipeline::META_GAMMA)?
        .and_then(|g| g.parse().ok())
        .unwrap_or(DEFAULT_GAMMA);
    Ok(SyncConfig {
        repo_root: root,
        project,
        workers,
        languages: LanguageFilter::from_env(),
        ignore: Vec::new(),
        gamma,
    })
}

/// Files changed relative to `base`, plus untracked files, via git.
fn git_changed_files(root: &Path, base: &str) -> Result<Vec<String>> {
    // A leading dash would be read as an option.
    if base.starts_with('-') || !validate_shell_arg(base) {
        return Err(Error::validation("base revision rejected by argument validation"));
    }
    let root_arg = root.to_string_lossy().into_owned();
    if !validate_shell_arg(&root_arg) {
        return Err(Error::validation("repository path rejected by argument validation"));
    }
    let run = |args: &[&str]| -> Result<String> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&root_arg)
            .args(args)
            .env("GIT_TERMINAL_PROMPT", "0")
            .output()?;
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            let first: String = err.lines().next().unwrap_or("git failed").chars().take(200).collect();
            return Err(Error::validation(format!("git: {first}")));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    };
    let diff = run(&["diff", "--name-only", "--relative", base, "--"])?;
    let untracked = run(&["ls-files", "--others", "--exclude-standard"])?;
    let mut files: Vec<String> = diff
        .lines()
        .chain(untracked.lines())
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    files.sort();
    files.dedup();
    Ok(files)
}
