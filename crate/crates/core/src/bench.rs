//! Synthetic repositories with a ground-truth manifest, and the timing
//! harness built on them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeType, GraphNode, NodeLabel};
use crate::lang::LanguageFilter;
use crate::pipeline::{self, PipelineConfig};
use crate::query;
use crate::store::{self, OpenMode, Store};
use crate::sync::{SyncConfig, SyncEngine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRepoSpec {
    pub file_count: usize,
    pub functions_per_file: usize,
    pub calls_per_function: usize,
    /// Other files each file imports.
    pub import_fanout: usize,
    pub files_per_package: usize,
    /// Share of packages written in Go; the rest are Python.
    pub go_share: f64,
    pub seed: u64,
}

impl Default for SyntheticRepoSpec {
    fn default() -> Self {
        SyntheticRepoSpec {
            file_count: 100,
            functions_per_file: 10,
            calls_per_function: 3,
            import_fanout: 2,
            files_per_package: 25,
            go_share: 0.25,
            seed: 42,
        }
    }
}

impl SyntheticRepoSpec {
    /// Desk-scale stand-in for the 49K-node reference repository.
    pub fn desk_scale() -> Self {
        SyntheticRepoSpec {
            file_count: 2000,
            functions_per_file: 20,
            calls_per_function: 3,
            import_fanout: 2,
            files_per_package: 40,
            go_share: 0.25,
            seed: 7,
        }
    }

    fn package_count(&self) -> usize {
        self.file_count.div_ceil(self.files_per_package.max(1))
    }

    fn is_go(&self, package: usize) -> bool {
        let go = (self.package_count() as f64 * self.go_share).round() as usize;
        package < go
    }
}

/// Ground truth for a generated repository.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoManifest {
    /// Source files, including Python package markers.
    pub files: Vec<String>,
    pub directories: Vec<String>,
    /// Qualified names of every function.
    pub functions: Vec<String>,
    /// (caller, callee) pairs, deduplicated and sorted.
    pub calls: Vec<(String, String)>,
    /// (importing file, imported file) pairs, sorted.
    pub imports: Vec<(String, String)>,
}

impl RepoManifest {
    /// Project + directories + files + functions.
    pub fn expected_nodes(&self) -> usize {
        1 + self.directories.len() + self.files.len() + self.functions.len()
    }
}

struct FilePlan {
    package: usize,
    index: usize,
    go: bool,
}

impl FilePlan {
    fn dir(&self) -> String {
        if self.go { format!("g{}", self.package) } else { format!("p{}", self.package) }
    }

    fn path(&self) -> String {
        let ext = if self.go { "go" } else { "py" };
        format!("{}/m{}.{ext}", self.dir(), self.index)
    }

    fn func(&self, k: usize) -> String {
        if self.go { format!("F{}_{k}", self.index) } else { format!("f{}_{k}", self.index) }
    }

    fn module(&self) -> String {
        if self.go { self.dir() } else { format!("{}.m{}", self.dir(), self.index) }
    }

    fn qname(&self, k: usize) -> String {
        format!("{}.{}", self.module(), self.func(k))
    }
}

pub const GO_MODULE: &str = "synth.example/repo";

/// Writes the repository for `spec` under `root` and returns its manifest.
/// The same spec always yields byte-identical files.
pub fn generate_repo(root: &Path, spec: &SyntheticRepoSpec) -> Result<RepoManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = spec.files_per_package.max(1);
    let plans: Vec<FilePlan> = (0..spec.file_count)
        .map(|i| FilePlan {
            package: i / per,
            index: i,
            go: spec.is_go(i / per),
        })
        .collect();
    let mut m = RepoManifest::default();
    let mut calls = BTreeSet::new();
    let mut imports = BTreeSet::new();
    let mut dirs = BTreeSet::new();
    let mut files = BTreeSet::new();
    let write = |rel: &str, text: &str| -> Result<()> {
        let p = root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(p, text)?;
        Ok(())
    };
    if plans.iter().any(|p| p.go) {
        write("go.mod", &format!("module {GO_MODULE}\n\ngo 1.21\n"))?;
    }

    for plan in &plans {
        dirs.insert(plan.dir());
        files.insert(plan.path());
        if !plan.go && plan.index % per == 0 {
            let marker = format!("{}/__init__.py", plan.dir());
            write(&marker, "")?;
            files.insert(marker);
        }
        // Import targets: other files of the same language.
        let mut targets: Vec<usize> = Vec::new();
        if spec.file_count > 1 {
            for _ in 0..spec.import_fanout * 4 {
                if targets.len() == spec.import_fanout {
                    break;
                }
                let t = rng.gen_range(0..spec.file_count);
                let tp = &plans[t];
                let usable = t != plan.index
                    && tp.go == plan.go
                    && !(plan.go && tp.package == plan.package)
                    && !targets.iter().any(|&o| plans[o].module() == tp.module());
                if usable {
                    targets.push(t);
                }
            }
        }
        let mut src = String::new();
        if plan.go {
            let _ = writeln!(src, "package g{}\n", plan.package);
            if !targets.is_empty() {
                src.push_str("import (\n");
                for &t in &targets {
                    let _ = writeln!(src, "\t\"{GO_MODULE}/{}\"", plans[t].dir());
                }
                src.push_str(")\n\n");
            }
        } else {
            for &t in &targets {
                let _ = writeln!(src, "import {} as m{}", plans[t].module(), t);
            }
            src.push('\n');
        }
        for &t in &targets {
            // A Go import covers every file of the package.
            for other in plans.iter().filter(|o| o.module() == plans[t].module()) {
                imports.insert((plan.path(), other.path()));
            }
        }
        for k in 0..spec.functions_per_file {
            let caller = plan.qname(k);
            m.functions.push(caller.clone());
            let mut body = String::new();
            for _ in 0..spec.calls_per_function {
                let remote = !targets.is_empty() && rng.gen_bool(0.5);
                let callee_k = rng.gen_range(0..spec.functions_per_file.max(1));
                if spec.functions_per_file == 0 {
                    break;
                }
                let (text, callee) = if remote {
                    let tp = &plans[targets[rng.gen_range(0..targets.len())]];
                    let prefix = if plan.go { format!("g{}", tp.package) } else { format!("m{}", tp.index) };
                    (format!("{prefix}.{}", tp.func(callee_k)), tp.qname(callee_k))
                } else {
                    (plan.func(callee_k), plan.qname(callee_k))
                };
                let _ = writeln!(body, "\t{text}(x)");
                calls.insert((caller.clone(), callee));
            }
            if plan.go {
                let _ = write!(src, "func {}(x int) int {{\n{body}\treturn x\n}}\n\n", plan.func(k));
            } else {
                let _ = write!(src, "def {}(x):\n{}    return x\n\n", plan.func(k), body.replace('\t', "    "));
            }
        }
        write(&plan.path(), &src)?;
    }
    m.files = files.into_iter().collect();
    m.directories = dirs.into_iter().collect();
    m.functions.sort();
    m.calls = calls.into_iter().collect();
    m.imports = imports.into_iter().collect();
    Ok(m)
}

/// Differences between an indexed store and the manifest (empty when they
/// agree). Community nodes and MEMBER_OF edges are not in the manifest.
pub fn check_against_manifest(store: &Store, m: &RepoManifest) -> Result<Vec<String>> {
    let g = store::canonical_graph(store.conn())?;
    let mut problems = Vec::new();
    let by_label = |l: NodeLabel| -> BTreeSet<String> {
        g.nodes.values().filter(|n| n.label == l).map(|n| n.qualified_name.clone()).collect()
    };
    let functions: BTreeSet<String> = by_label(NodeLabel::Function);
    let expected: BTreeSet<String> = m.functions.iter().cloned().collect();
    if functions != expected {
        problems.push(format!("functions: {} indexed vs {} expected", functions.len(), expected.len()));
    }
    let files: BTreeSet<String> = g.nodes.values().filter(|n| n.label == NodeLabel::File).map(|n| n.file_path.clone()).collect();
    if files != m.files.iter().cloned().collect() {
        problems.push(format!("files: {} indexed vs {} expected", files.len(), m.files.len()));
    }
    let non_community = g.nodes.values().filter(|n| n.label != NodeLabel::Community).count();
    if non_community != m.expected_nodes() {
        problems.push(format!("nodes: {non_community} indexed vs {} expected", m.expected_nodes()));
    }
    let pairs = |ty: EdgeType| -> BTreeSet<(String, String)> {
        g.edges
            .keys()
            .filter(|k| k.2 == ty)
            .map(|k| (k.0.qualified_name.clone(), k.1.qualified_name.clone()))
            .collect()
    };
    let calls = pairs(EdgeType::Calls);
    let expected_calls: BTreeSet<(String, String)> = m.calls.iter().cloned().collect();
    if calls != expected_calls {
        let missing = expected_calls.difference(&calls).take(3).collect::<Vec<_>>();
        let extra = calls.difference(&expected_calls).take(3).collect::<Vec<_>>();
        problems.push(format!("calls differ; missing {missing:?}, extra {extra:?}"));
    }
    let imports: BTreeSet<(String, String)> = pairs(EdgeType::Imports)
        .into_iter()
        .map(|(a, b)| (a.trim_start_matches("file:").to_string(), b.trim_start_matches("file:").to_string()))
        .collect();
    if imports != m.imports.iter().cloned().collect() {
        problems.push(format!("imports: {} indexed vs {} expected", imports.len(), m.imports.len()));
    }
    Ok(problems)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchCase {
    FreshIndex,
    IncrementalReindex,
    BfsDepth5,
    SinglePatternQuery,
    NameSearch,
    DeadCode,
    InsertDeferredIndexes,
    InsertEagerIndexes,
}

impl BenchCase {
    pub const ALL: [BenchCase; 8] = [
        BenchCase::FreshIndex,
        BenchCase::IncrementalReindex,
        BenchCase::BfsDepth5,
        BenchCase::SinglePatternQuery,
        BenchCase::NameSearch,
        BenchCase::DeadCode,
        BenchCase::InsertDeferredIndexes,
        BenchCase::InsertEagerIndexes,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSuite {
    pub spec: SyntheticRepoSpec,
    pub cases: Vec<BenchCase>,
    /// Timed runs per case, after one discarded warm-up.
    pub runs: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: BenchCase,
    pub median_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub results: Vec<CaseResult>,
}

impl BenchReport {
    pub fn median(&self, case: BenchCase) -> Option<f64> {
        self.results.iter().find(|r| r.case == case).map(|r| r.median_ms)
    }
}

pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 }
}

fn time_runs(runs: usize, mut f: impl FnMut(usize) -> Result<()>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(runs);
    for i in 0..=runs {
        let start = Instant::now();
        f(i)?;
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        if i > 0 {
            out.push(ms);
        }
    }
    Ok(out)
}

fn bench_config(root: &Path, workers: usize) -> PipelineConfig {
    let mut c = PipelineConfig::new(root);
    c.project = Some("synthetic".into());
    c.workers = workers.max(1);
    c.languages = LanguageFilter(None);
    c.cochange = false;
    c
}

/// Runs the suite in a scratch directory. Correctness against the manifest
/// is checked before any case is timed.
pub fn run_bench(suite: &BenchSuite) -> Result<BenchReport> {
    if suite.cases.is_empty() {
        return Ok(BenchReport::default());
    }
    let work = tempfile::tempdir()?;
    let repo = work.path().join("repo");
    let manifest = generate_repo(&repo, &suite.spec)?;
    let config = bench_config(&repo, suite.workers);
    let db = work.path().join("bench.db");
    let mut store = Store::open(&db, OpenMode::ReadWrite)?;
    pipeline::run_pipeline(&config, &mut store)?;
    let problems = check_against_manifest(&store, &manifest)?;
    if !problems.is_empty() {
        return Err(Error::validation(format!("index disagrees with manifest: {}", problems.join("; "))));
    }
    let mut report = BenchReport {
        node_count: store.count_nodes()?,
        edge_count: store.count_edges()?,
        results: Vec::new(),
    };
    let root_fn = manifest.functions.first().cloned().unwrap_or_default();
    let root_simple = root_fn.rsplit('.').next().unwrap_or_default().to_string();

    for &case in &suite.cases {
        let samples = match case {
            BenchCase::FreshIndex => {
                let path = work.path().join("fresh.db");
                time_runs(suite.runs, |_| {
                    store::delete_store(&path)?;
                    let mut s = Store::open(&path, OpenMode::ReadWrite)?;
                    pipeline::run_pipeline(&config, &mut s).map(|_| ())
                })?
            }
            BenchCase::IncrementalReindex => {
                let mut engine = SyncEngine::load(&store, SyncConfig::from_pipeline(&config))?;
                let target = manifest.files.iter().find(|f| f.ends_with(".py") && !f.ends_with("__init__.py")).cloned();
                let Some(target) = target else { continue };
                let original = std::fs::read_to_string(repo.join(&target))?;
                let samples = time_runs(suite.runs, |i| {
                    let text = format!("{original}\ndef bench_extra_{i}(x):\n    return x\n");
                    std::fs::write(repo.join(&target), text)?;
                    let r = engine.reindex_file(&mut store, &target)?;
                    if r.changed.is_empty() {
                        return Err(Error::validation("incremental run saw no change"));
                    }
                    Ok(())
                })?;
                std::fs::write(repo.join(&target), &original)?;
                engine.reindex_file(&mut store, &target)?;
                samples
            }
            BenchCase::BfsDepth5 => time_runs(suite.runs, |_| {
                query::trace_call_path(store.conn(), &root_fn, query::TraceDirection::Outbound, 5).map(|_| ())
            })?,
            BenchCase::SinglePatternQuery => {
                let q = format!("MATCH (f:Function) WHERE f.name = '{root_simple}' RETURN f.qualified_name");
                time_runs(suite.runs, |_| {
                    let r = query::execute_query(store.conn(), &q)?;
                    if r.rows.len() != 1 {
                        return Err(Error::validation(format!("expected 1 row, got {}", r.rows.len())));
                    }
                    Ok(())
                })?
            }
            BenchCase::NameSearch => time_runs(suite.runs, |_| {
                query::search_symbols(store.conn(), &format!("^{root_simple}$"), None, 10).map(|_| ())
            })?,
            BenchCase::DeadCode => time_runs(suite.runs, |_| query::detect_dead_code(store.conn()).map(|_| ()))?,
            BenchCase::InsertDeferredIndexes | BenchCase::InsertEagerIndexes => {
                let defer = case == BenchCase::InsertDeferredIndexes;
                let nodes: Vec<GraphNode> = store::load_nodes(store.conn())?.into_iter().map(|(_, n)| n).collect();
                let ids: std::collections::HashMap<i64, usize> = store::load_nodes(store.conn())?
                    .into_iter()
                    .enumerate()
                    .map(|(i, (id, _))| (id, i + 1))
                    .collect();
                let edges: Vec<crate::graph::BufferEdge> = store::load_edges(store.conn())?
                    .into_iter()
                    .map(|e| crate::graph::BufferEdge {
                        src: crate::graph::TempId(ids[&e.src] as u64),
                        dst: crate::graph::TempId(ids[&e.dst] as u64),
                        edge_type: e.edge_type,
                        confidence: e.confidence,
                        properties: e.properties,
                    })
                    .collect();
                let path = work.path().join(if defer { "deferred.db" } else { "eager.db" });
                time_runs(suite.runs, |_| {
                    store::delete_store(&path)?;
                    let mut s = Store::open(&path, OpenMode::ReadWrite)?;
                    let tx = s.conn_mut().transaction()?;
                    store::bulk_insert(&tx, &nodes, &edges, defer)?;
                    tx.commit()?;
                    Ok(())
                })?
            }
        };
        report.results.push(CaseResult {
            case,
            median_ms: median(&samples),
            samples_ms: samples,
        });
    }
    Ok(report)
}
