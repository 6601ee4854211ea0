//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; run with `cargo test -p codegraph --test acceptance -- --nocapture`
//! to see them.

mod edits;
mod oracle;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use codegraph::bench::{generate_repo, run_bench, BenchCase, BenchSuite, SyntheticRepoSpec};
use codegraph::community::{local_moving, louvain_partition, modularity_gain, CallGraph};
use codegraph::graph::{EdgeType, GraphBuffer, GraphNode, NodeLabel, Span, TempId};
use codegraph::lang::{adapter, extract_file, LanguageFilter};
use codegraph::mcp::{adversarial_corpus, Server, ServerConfig, CATEGORIES};
use codegraph::pipeline::assemble::{build_resolver, claim_definitions};
use codegraph::pipeline::{extract_one, run_pipeline, scan_repo, PipelineConfig};
use codegraph::query::{execute_query, trace_call_path, TraceDirection, ROW_CEILING};
use codegraph::resolve::resolve_callee;
use codegraph::store::{canonical_graph, CanonicalGraph, Diagnostics, OpenMode, Store};
use codegraph::sync::{SyncConfig, SyncEngine};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use oracle::{Cascade, Def, Dense, Dir, Imports, Lit, Op, QCond, QNode, QRel, QRet, Query, Tables};

// Pinned thresholds.
const EDIT_SCRIPTS: usize = 20;
const EDITS_PER_SCRIPT: usize = 6;
const MIN_CALL_SITES: usize = 200;
const MIN_LANGUAGES: usize = 3;
const MIN_TOP3_SHARE: f64 = 0.70;
const LOUVAIN_GRAPHS: usize = 1000;
const LOUVAIN_MAX_NODES: usize = 12;
const GAIN_TOLERANCE: f64 = 1e-9;
const QUERY_CASES: usize = 500;
const QUERY_MAX_NODES: usize = 200;
const TRACE_DAGS: usize = 100;
const MIN_NODES: usize = 40_000;
const MIN_EDGES: usize = 150_000;
const FRESH_BUDGET_MS: f64 = 60_000.0;
const INCREMENTAL_SPEEDUP: f64 = 2.0;
const BFS_BUDGET_MS: f64 = 50.0;
const PATTERN_BUDGET_MS: f64 = 100.0;
const DEAD_CODE_BUDGET_MS: f64 = 2_000.0;
const BENCH_RUNS: usize = 3;
const MIN_PAYLOADS: usize = 23;
const PAYLOAD_DEADLINE: Duration = Duration::from_secs(2);
const WORKER_COUNTS: [usize; 3] = [1, 2, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn copy_tree(from: &Path, to: &Path) {
    for e in walkdir::WalkDir::new(from).into_iter().filter_map(Result::ok) {
        let rel = e.path().strip_prefix(from).unwrap();
        let dst = to.join(rel);
        if e.file_type().is_dir() {
            std::fs::create_dir_all(&dst).unwrap();
        } else {
            std::fs::copy(e.path(), &dst).unwrap();
        }
    }
}

/// The checked-in corpus plus a small generated package tree under
/// `synth/` with its own Go module.
fn fixture_repo(seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&corpus_dir(), dir.path());
    let spec = SyntheticRepoSpec {
        file_count: 16,
        functions_per_file: 4,
        calls_per_function: 2,
        import_fanout: 2,
        files_per_package: 4,
        go_share: 0.25,
        seed,
    };
    generate_repo(&dir.path().join("synth"), &spec).unwrap();
    dir
}

fn config(root: &Path, workers: usize) -> PipelineConfig {
    let mut c = PipelineConfig::new(root);
    c.project = Some("fixture".into());
    c.workers = workers;
    c.languages = LanguageFilter(None);
    c.cochange = false;
    c
}

fn fresh_index(root: &Path, workers: usize) -> (CanonicalGraph, BTreeMap<String, Diagnostics>) {
    let db = tempfile::tempdir().unwrap();
    let mut s = Store::open(db.path().join("fresh.db"), OpenMode::ReadWrite).unwrap();
    run_pipeline(&config(root, workers), &mut s).unwrap();
    (canonical_graph(s.conn()).unwrap(), s.diagnostics().unwrap())
}

// ---------------------------------------------------------------------------

fn sync_convergence() -> Outcome {
    let mut converged = 0;
    let mut failures = Vec::new();
    let mut edits = BTreeMap::<String, usize>::new();
    for script in 0..EDIT_SCRIPTS {
        let repo = fixture_repo(100 + script as u64);
        let db = tempfile::tempdir().unwrap();
        let mut store = Store::open(db.path().join("g.db"), OpenMode::ReadWrite).unwrap();
        let c = config(repo.path(), 2);
        run_pipeline(&c, &mut store).unwrap();
        let mut engine = SyncEngine::load(&store, SyncConfig::from_pipeline(&c)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(script as u64);
        for n in 0..EDITS_PER_SCRIPT {
            let (kind, touched) = edits::random_edit(repo.path(), &mut rng, n);
            *edits.entry(kind).or_default() += 1;
            match rng.gen_range(0..3) {
                0 => {
                    for t in &touched {
                        engine.reindex_file(&mut store, t).unwrap();
                    }
                }
                1 => {
                    engine.poll(&mut store).unwrap();
                }
                _ => {}
            }
        }
        // Quiescence: poll until nothing changes.
        let mut rounds = 0;
        while !engine.poll(&mut store).unwrap().is_noop() {
            rounds += 1;
            assert!(rounds < 5, "sync did not quiesce");
        }
        let synced = canonical_graph(store.conn()).unwrap();
        let (expected, _) = fresh_index(repo.path(), 2);
        if synced == expected && store.dangling_edges().unwrap() == 0 {
            converged += 1;
        } else {
            failures.push(format!("script {script}: {:?}", synced.diff_summary(&expected, 5)));
        }
    }
    let kinds: Vec<String> = edits.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut detail = format!("{converged}/{EDIT_SCRIPTS} edit scripts converged ({})", kinds.join(" "));
    if let Some(f) = failures.first() {
        detail += &format!("; first failure {f}");
    }
    outcome(converged == EDIT_SCRIPTS, detail)
}

// ---------------------------------------------------------------------------

fn rewrite_self(ext: &codegraph::lang::FileExtraction, callee: &str, enclosing: Option<usize>) -> String {
    if ext.language == "python" {
        if let Some(rest) = callee.strip_prefix("self.").or_else(|| callee.strip_prefix("cls.")) {
            if let Some(def) = enclosing.map(|d| &ext.definitions[d]) {
                if !def.container_chain.is_empty() {
                    return format!("{}.{rest}", def.container_chain.join("."));
                }
            }
        }
    }
    callee.to_string()
}

fn resolution_equivalence() -> Outcome {
    let root = corpus_dir();
    let scan = scan_repo(&root, &LanguageFilter(None), &[]).unwrap();
    let exts: Vec<_> = scan.files.iter().filter_map(|f| extract_one(&root, f)).map(|(_, e)| e).collect();
    let claims = claim_definitions(&exts);
    let resolver = build_resolver(&exts, &claims, &scan.go_modules);

    let mut defs: Vec<Def> = Vec::new();
    for (f, ext) in exts.iter().enumerate() {
        for (d, def) in ext.definitions.iter().enumerate() {
            let label = def.kind.label();
            if !claims.owner[f][d] || !(label.is_callable() || label == NodeLabel::Class) {
                continue;
            }
            if let Some(q) = &claims.qnames[f][d] {
                defs.push(Def {
                    qname: q.clone(),
                    simple: def.simple_name.clone(),
                    module: ext.module_qname.clone(),
                });
            }
        }
    }
    let cascade = Cascade { defs: &defs };

    let mut sites = 0;
    let mut agree = 0;
    let mut languages = BTreeMap::<String, usize>::new();
    let mut by_strategy = [0usize; 7];
    let mut mismatch = None;
    for (f, ext) in exts.iter().enumerate() {
        let mut imports = Imports::default();
        for e in &ext.imports {
            let target = resolver.mapper.map(&e.target_module_qname);
            if e.wildcard {
                if !imports.wildcards.contains(&target) {
                    imports.wildcards.push(target);
                }
            } else if e.local_alias != "_" {
                imports.aliases.insert(e.local_alias.clone(), target);
            }
        }
        for call in &ext.calls {
            let text = rewrite_self(ext, &call.callee_text, call.enclosing_definition);
            let got = resolve_callee(&resolver.functions, &text, &resolver.import_maps[f], &ext.module_qname);
            let want = cascade.resolve(&text, &imports, &ext.module_qname);
            sites += 1;
            *languages.entry(ext.language.clone()).or_default() += 1;
            let rank = if got.is_resolved() { got.strategy.rank() } else { 0 };
            by_strategy[rank as usize] += 1;
            if got.target_qname == want.target
                && rank == want.strategy
                && (got.confidence - want.confidence).abs() < 1e-12
            {
                agree += 1;
            } else if mismatch.is_none() {
                mismatch = Some(format!("{}: {text:?} gave {got:?}, oracle {want:?}", ext.path));
            }
        }
    }
    let resolved: usize = by_strategy[1..].iter().sum();
    let top3: usize = by_strategy[1..=3].iter().sum();
    let share = top3 as f64 / resolved.max(1) as f64;
    let langs_ok = languages.len() >= MIN_LANGUAGES;
    let pass = agree == sites && sites >= MIN_CALL_SITES && langs_ok && share >= MIN_TOP3_SHARE;
    let mut detail = format!(
        "{agree}/{sites} call sites match the oracle ({}); strategies 1-3 resolve {top3}/{resolved} = {:.1}% (by strategy {:?}, unresolved {})",
        languages.iter().map(|(l, n)| format!("{l}={n}")).collect::<Vec<_>>().join(" "),
        share * 100.0,
        &by_strategy[1..],
        by_strategy[0],
    );
    // For reference: the pipeline's own mix, where receiver calls with a
    // known type bypass the cascade.
    let (_, diags) = fresh_index(&root, 1);
    let mut mix = BTreeMap::<String, u64>::new();
    for d in diags.values() {
        for (k, v) in &d.by_strategy {
            *mix.entry(k.clone()).or_default() += v;
        }
    }
    let cascade: u64 = mix.iter().filter(|(k, _)| k.as_str() != "type").map(|(_, v)| v).sum();
    let top: u64 = ["import_map", "import_map_suffix", "same_module"].iter().filter_map(|k| mix.get(*k)).sum();
    detail += &format!(
        "; pipeline: {} type-resolved, strategies 1-3 {top}/{cascade} of cascade resolutions",
        mix.get("type").copied().unwrap_or(0)
    );
    if let Some(m) = mismatch {
        detail += &format!("; first mismatch {m}");
    }
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------

fn node_name(i: usize) -> String {
    format!("n{i:02}")
}

fn random_weighted(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize, f64)>) {
    let n = rng.gen_range(2..=LOUVAIN_MAX_NODES);
    let m = rng.gen_range(1..=3 * n);
    let edges = (0..m)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(1..=4) as f64))
        .collect();
    (n, edges)
}

/// The graph restricted to nodes that carry an edge, indexed the way the
/// library indexes them (sorted names).
fn dense_of(edges: &[(usize, usize, f64)]) -> (Vec<usize>, Dense) {
    let mut present: Vec<usize> = edges.iter().filter(|(a, b, _)| a != b).flat_map(|&(a, b, _)| [a, b]).collect();
    present.sort();
    present.dedup();
    let pos: HashMap<usize, usize> = present.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mapped: Vec<(usize, usize, f64)> =
        edges.iter().filter(|(a, b, _)| a != b).map(|&(a, b, w)| (pos[&a], pos[&b], w)).collect();
    (present.clone(), Dense::new(present.len(), &mapped))
}

fn call_graph(edges: &[(usize, usize, f64)]) -> CallGraph {
    CallGraph::from_edges(edges.iter().map(|&(a, b, w)| (node_name(a), node_name(b), w)))
}

fn louvain_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    let mut moves = 0usize;
    let mut decreasing = 0usize;
    let mut graphs = 0usize;
    while graphs < LOUVAIN_GRAPHS {
        let (_, edges) = random_weighted(&mut rng);
        let (_, dense) = dense_of(&edges);
        let n = dense.len();
        if n == 0 {
            continue;
        }
        graphs += 1;
        let g = call_graph(&edges);
        assert_eq!(g.len(), n);
        let m = dense.total();
        let k = rng.gen_range(1..=n.min(4));
        let community: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let q0 = dense.modularity(&community, 1.0);
        for i in 0..n {
            let w_to = |c: usize| (0..n).filter(|&j| j != i && community[j] == c).map(|j| dense.w[i][j]).sum::<f64>();
            let sigma = |c: usize| (0..n).filter(|&j| j != i && community[j] == c).map(|j| dense.degree(j)).sum::<f64>();
            let k_i = dense.degree(i);
            let from = community[i];
            for target in 0..=k {
                let predicted = (modularity_gain(w_to(target), k_i, sigma(target), m, 1.0)
                    - modularity_gain(w_to(from), k_i, sigma(from), m, 1.0))
                    / m;
                let mut after = community.clone();
                after[i] = target;
                let actual = dense.modularity(&after, 1.0) - q0;
                worst = worst.max((predicted - actual).abs());
                checks += 1;
            }
        }
        // Every accepted move is replayed against the global definition.
        let p = local_moving(&g, 1.0);
        let mut c: Vec<usize> = (0..n).collect();
        let mut q = dense.modularity(&c, 1.0);
        for mv in &p.moves {
            c[mv.node] = mv.to;
            let next = dense.modularity(&c, 1.0);
            if next < q - 1e-12 {
                decreasing += 1;
            }
            q = next;
            moves += 1;
        }
    }

    let fixture = |pairs: &[(usize, usize)]| {
        let edges: Vec<(usize, usize, f64)> = pairs.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        let (_, dense) = dense_of(&edges);
        let best = oracle::all_partitions(dense.len())
            .into_iter()
            .max_by(|a, b| dense.modularity(a, 1.0).total_cmp(&dense.modularity(b, 1.0)))
            .unwrap();
        let p = louvain_partition(&call_graph(&edges), 1.0);
        (oracle::canonical(&p.community) == best, p.sweeps, best)
    };
    let (tri_ok, tri_sweeps, tri) = fixture(&[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)]);
    let (k4_ok, k4_sweeps, k4) = fixture(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);

    let pass = worst <= GAIN_TOLERANCE && decreasing == 0 && tri_ok && k4_ok;
    outcome(
        pass,
        format!(
            "{checks} gain checks on {graphs} graphs, max |error| {worst:.2e} (tolerance {GAIN_TOLERANCE:.0e}); \
             {moves} accepted moves, {decreasing} decreased Q; two triangles {tri:?} {} in {tri_sweeps} sweeps; \
             K4 {k4:?} {} in {k4_sweeps} sweeps",
            if tri_ok { "recovered" } else { "missed" },
            if k4_ok { "recovered" } else { "missed" },
        ),
    )
}

// ---------------------------------------------------------------------------

const LABELS: [NodeLabel; 4] = [NodeLabel::Function, NodeLabel::Method, NodeLabel::Class, NodeLabel::File];
const EDGE_TYPES: [EdgeType; 4] = [EdgeType::Calls, EdgeType::AsyncCalls, EdgeType::Usage, EdgeType::Inherits];
const NAMES: [&str; 6] = ["save", "load", "run", "main", "parse", "helper"];

fn random_graph(rng: &mut ChaCha8Rng, n: usize, e: usize) -> GraphBuffer {
    let mut b = GraphBuffer::new();
    let mut ids: Vec<TempId> = Vec::new();
    for i in 0..n {
        let name = NAMES[rng.gen_range(0..NAMES.len())];
        let label = LABELS[rng.gen_range(0..LABELS.len())];
        let mut node = GraphNode::new(label, format!("m{}.{name}_{i}", i % 7)).with_simple_name(name);
        if rng.gen_bool(0.8) {
            let start = rng.gen_range(1..50);
            node = node.with_file(format!("m{}.py", i % 7), Span::new(start, start + rng.gen_range(0..20)));
        }
        if rng.gen_bool(0.5) {
            node.properties.insert("kind".into(), ["a", "b"][rng.gen_range(0..2)].into());
        }
        if rng.gen_bool(0.5) {
            let size = if rng.gen_bool(0.9) { rng.gen_range(0..20).to_string() } else { "x1".into() };
            node.properties.insert("size".into(), size);
        }
        ids.push(b.add_node(node).unwrap());
    }
    for _ in 0..e {
        let (s, d) = (ids[rng.gen_range(0..n)], ids[rng.gen_range(0..n)]);
        let ty = EDGE_TYPES[rng.gen_range(0..EDGE_TYPES.len())];
        let conf = [0.3, 0.55, 0.9, 1.0][rng.gen_range(0..4)];
        let mut props = codegraph::graph::Properties::new();
        if rng.gen_bool(0.5) {
            props.insert("strategy".into(), ["same_module", "fuzzy"][rng.gen_range(0..2)].into());
        }
        b.add_edge_with(s, d, ty, conf, props).unwrap();
    }
    b
}

fn random_lit(rng: &mut ChaCha8Rng, prop: &str) -> Lit {
    match prop {
        "name" => Lit::Str(NAMES[rng.gen_range(0..NAMES.len())].into()),
        "label" => Lit::Str(LABELS[rng.gen_range(0..LABELS.len())].as_str().into()),
        "kind" | "strategy" => Lit::Str(["a", "b", "fuzzy", "same_module"][rng.gen_range(0..4)].into()),
        "type" => Lit::Str(EDGE_TYPES[rng.gen_range(0..EDGE_TYPES.len())].as_str().into()),
        "confidence" => Lit::Num([0.3, 0.55, 0.9, 1.0, 0.5][rng.gen_range(0..5)]),
        "qualified_name" | "file_path" => Lit::Str(format!("m{}", rng.gen_range(0..7))),
        _ => {
            if rng.gen_bool(0.8) {
                Lit::Num(rng.gen_range(0..25) as f64)
            } else {
                Lit::Str(rng.gen_range(0..25).to_string())
            }
        }
    }
}

fn random_query(rng: &mut ChaCha8Rng) -> Query {
    let hops = [0, 1, 1, 2][rng.gen_range(0..4)];
    let mut nodes = Vec::new();
    for i in 0..=hops {
        let mut props = Vec::new();
        if rng.gen_bool(0.15) {
            let p = ["name", "kind"][rng.gen_range(0..2)];
            props.push((p.to_string(), random_lit(rng, p)));
        }
        nodes.push(QNode {
            var: format!("v{i}"),
            label: rng.gen_bool(0.4).then(|| LABELS[rng.gen_range(0..LABELS.len())].as_str().to_string()),
            props,
        });
    }
    // Occasionally close a cycle back to the first node.
    if hops > 0 && rng.gen_bool(0.1) {
        let last = nodes.last_mut().unwrap();
        last.var = "v0".into();
        last.label = None;
        last.props.clear();
    }
    let rels: Vec<QRel> = (0..hops)
        .map(|i| {
            let mut types: Vec<String> = Vec::new();
            for t in EDGE_TYPES {
                if rng.gen_bool(0.3) {
                    types.push(t.as_str().to_string());
                }
            }
            QRel {
                var: if rng.gen_bool(0.7) { format!("r{i}") } else { String::new() },
                types,
                dir: [Dir::Out, Dir::In, Dir::Both][rng.gen_range(0..3)],
            }
        })
        .collect();
    let node_vars: Vec<String> = {
        let mut v: Vec<String> = nodes.iter().map(|n| n.var.clone()).collect();
        v.dedup();
        v.sort();
        v.dedup();
        v
    };
    let rel_vars: Vec<String> = rels.iter().filter(|r| !r.var.is_empty()).map(|r| r.var.clone()).collect();
    let mut conds = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        let on_rel = !rel_vars.is_empty() && rng.gen_bool(0.3);
        let (var, prop) = if on_rel {
            let p = ["type", "confidence", "strategy", "id"][rng.gen_range(0..4)];
            (rel_vars.choose(rng).unwrap().clone(), p)
        } else {
            let p = ["name", "label", "qualified_name", "start_line", "size", "kind", "file_path", "end_line", "missing"]
                [rng.gen_range(0..9)];
            (node_vars.choose(rng).unwrap().clone(), p)
        };
        conds.push(QCond {
            var,
            value: random_lit(rng, prop),
            prop: prop.to_string(),
            op: [Op::Eq, Op::Ne, Op::Lt, Op::Gt, Op::Contains][rng.gen_range(0..5)],
        });
    }
    let all_vars: Vec<String> = node_vars.iter().chain(&rel_vars).cloned().collect();
    let mut rets = Vec::new();
    let counting = rng.gen_bool(0.2);
    for _ in 0..rng.gen_range(1..=3) {
        let v = all_vars.choose(rng).unwrap().clone();
        let is_rel = rel_vars.contains(&v);
        rets.push(if rng.gen_bool(0.3) {
            QRet::Var(v)
        } else {
            let p = if is_rel {
                ["type", "confidence", "strategy", "src"][rng.gen_range(0..4)]
            } else {
                ["name", "qualified_name", "size", "label", "start_line", "missing"][rng.gen_range(0..6)]
            };
            QRet::Prop(v, p.to_string())
        });
    }
    if counting {
        rets.push(if rng.gen_bool(0.5) { QRet::Count(None) } else { QRet::Count(Some(all_vars[0].clone())) });
    }
    Query {
        nodes,
        rels,
        conds,
        rets,
        limit: rng.gen_bool(0.3).then(|| rng.gen_range(1..20)),
    }
}

fn store_of(b: &GraphBuffer) -> (tempfile::TempDir, Store) {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Store::open(dir.path().join("q.db"), OpenMode::ReadWrite).unwrap();
    s.replace_graph(b).unwrap();
    (dir, s)
}

fn query_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut equal = 0;
    let mut nonempty = 0;
    let mut first_diff = None;
    let mut over_ceiling = 0;
    for case in 0..QUERY_CASES {
        let n = rng.gen_range(1..=QUERY_MAX_NODES);
        let e = rng.gen_range(0..=2 * n);
        let b = random_graph(&mut rng, n, e);
        let (_d, store) = store_of(&b);
        let tables = Tables::read(store.conn());
        let q = random_query(&mut rng);
        let text = q.text();
        let want = oracle::nested_loop(&tables, &q, ROW_CEILING);
        match execute_query(store.conn(), &text) {
            Ok(got) => {
                if got.rows.len() > ROW_CEILING {
                    over_ceiling += 1;
                }
                if got.columns == want.columns && got.rows == want.rows && got.truncated == want.truncated {
                    equal += 1;
                    if !got.rows.is_empty() {
                        nonempty += 1;
                    }
                } else if first_diff.is_none() {
                    first_diff = Some(format!(
                        "case {case} {text}: {} rows vs oracle {}",
                        got.rows.len(),
                        want.rows.len()
                    ));
                }
            }
            Err(err) => {
                if first_diff.is_none() {
                    first_diff = Some(format!("case {case} {text}: {err}"));
                }
            }
        }
    }

    // A result larger than the ceiling is cut exactly at it.
    let big = random_graph(&mut rng, 300, 1500);
    let (_d, store) = store_of(&big);
    let tables = Tables::read(store.conn());
    let q = Query {
        nodes: (0..4).map(|i| QNode { var: format!("v{i}"), label: None, props: vec![] }).collect(),
        rels: (0..3).map(|i| QRel { var: format!("r{i}"), types: vec![], dir: Dir::Both }).collect(),
        conds: vec![],
        rets: vec![QRet::Prop("v0".into(), "id".into()), QRet::Prop("v3".into(), "id".into())],
        limit: None,
    };
    let want = oracle::nested_loop(&tables, &q, usize::MAX);
    let got = execute_query(store.conn(), &q.text()).unwrap();
    let capped = got.rows.len() == ROW_CEILING
        && got.truncated
        && want.rows.len() > ROW_CEILING
        && got.rows[..] == want.rows[..ROW_CEILING];
    if got.rows.len() > ROW_CEILING {
        over_ceiling += 1;
    }

    // Trace depths against breadth-first search.
    let mut traces_ok = 0;
    let mut trace_diff = None;
    for t in 0..TRACE_DAGS {
        let n = rng.gen_range(5..=120);
        let mut b = GraphBuffer::new();
        let ids: Vec<TempId> = (0..n)
            .map(|i| b.add_node(GraphNode::new(NodeLabel::Function, format!("dag.f{i:03}"))).unwrap())
            .collect();
        let mut calls = Vec::new();
        for _ in 0..rng.gen_range(0..3 * n) {
            let x = rng.gen_range(0..n - 1);
            let y = rng.gen_range(x + 1..n);
            let ty = [EdgeType::Calls, EdgeType::AsyncCalls, EdgeType::Usage][rng.gen_range(0..3)];
            b.add_edge(ids[x], ids[y], ty, 0.9).unwrap();
            if ty != EdgeType::Usage {
                calls.push((x, y));
            }
        }
        let (_d, store) = store_of(&b);
        let root = rng.gen_range(0..n);
        let depth = rng.gen_range(1..=6);
        let inbound = rng.gen_bool(0.5);
        let (dir, edges): (TraceDirection, Vec<(usize, usize)>) = if inbound {
            (TraceDirection::Inbound, calls.iter().map(|&(a, b)| (b, a)).collect())
        } else {
            (TraceDirection::Outbound, calls.clone())
        };
        let path = trace_call_path(store.conn(), &format!("dag.f{root:03}"), dir, depth).unwrap();
        let got: BTreeMap<usize, u32> =
            path.layers.iter().map(|l| (l.node.simple_name[1..].parse().unwrap(), l.depth)).collect();
        let sorted = path.layers.windows(2).all(|w| w[0].depth <= w[1].depth);
        let want = oracle::bfs(&edges, root, depth);
        if got == want && sorted && got.len() == path.layers.len() {
            traces_ok += 1;
        } else if trace_diff.is_none() {
            trace_diff = Some(format!("dag {t}: {got:?} vs {want:?}"));
        }
    }

    let pass = equal == QUERY_CASES && capped && over_ceiling == 0 && traces_ok == TRACE_DAGS;
    let mut detail = format!(
        "{equal}/{QUERY_CASES} queries equal the nested-loop matcher ({nonempty} non-empty); \
         {traces_ok}/{TRACE_DAGS} traces equal BFS; ceiling {} ({} rows of {} matches returned, truncated={}); \
         {over_ceiling} results above {ROW_CEILING}",
        if capped { "held" } else { "violated" },
        got.rows.len(),
        want.rows.len(),
        got.truncated,
    );
    if let Some(d) = first_diff.or(trace_diff) {
        detail += &format!("; first difference {d}");
    }
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------

fn performance() -> Outcome {
    let suite = BenchSuite {
        spec: SyntheticRepoSpec::desk_scale(),
        cases: BenchCase::ALL.to_vec(),
        runs: BENCH_RUNS,
        workers: codegraph::par::default_workers(),
    };
    let r = match run_bench(&suite) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("bench failed: {e}")),
    };
    let med = |c| r.median(c).unwrap_or(f64::INFINITY);
    let fresh = med(BenchCase::FreshIndex);
    let incr = med(BenchCase::IncrementalReindex);
    let bfs = med(BenchCase::BfsDepth5);
    let pattern = med(BenchCase::SinglePatternQuery);
    let dead = med(BenchCase::DeadCode);
    let deferred = med(BenchCase::InsertDeferredIndexes);
    let eager = med(BenchCase::InsertEagerIndexes);
    let checks = [
        r.node_count >= MIN_NODES && r.edge_count >= MIN_EDGES,
        fresh <= FRESH_BUDGET_MS,
        incr * INCREMENTAL_SPEEDUP <= fresh,
        bfs <= BFS_BUDGET_MS,
        pattern <= PATTERN_BUDGET_MS,
        dead <= DEAD_CODE_BUDGET_MS,
        deferred < eager,
    ];
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "{} nodes / {} edges; medians of {BENCH_RUNS}: fresh {fresh:.0} ms, incremental {incr:.0} ms ({:.1}x), \
             BFS depth 5 {bfs:.2} ms, pattern {pattern:.2} ms, dead code {dead:.0} ms, \
             insert deferred {deferred:.0} ms vs index-first {eager:.0} ms",
            r.node_count,
            r.edge_count,
            fresh / incr,
        ),
    )
}

// ---------------------------------------------------------------------------

fn robustness() -> Outcome {
    let repo = tempfile::tempdir().unwrap();
    copy_tree(&corpus_dir(), repo.path());
    let outside = tempfile::tempdir().unwrap();
    std::fs::write(outside.path().join("secret.txt"), "top secret").unwrap();
    std::os::unix::fs::symlink(outside.path(), repo.path().join("link_out")).unwrap();
    let db = tempfile::tempdir().unwrap();
    let db_path = db.path().join("g.db");

    let corpus = adversarial_corpus();
    let per_category: Vec<usize> = CATEGORIES.iter().map(|c| corpus.iter().filter(|p| p.category == *c).count()).collect();

    // The server lives on its own thread so a hang shows up as a timeout.
    let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
    let (resp_tx, resp_rx) = mpsc::channel::<Option<Value>>();
    let mut cfg = ServerConfig::new(repo.path());
    cfg.db = Some(db_path.clone());
    cfg.workers = 1;
    let worker = std::thread::spawn(move || {
        let mut server = Server::new(cfg);
        for msg in req_rx {
            let reply = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| server.handle_bytes(&msg)));
            let _ = resp_tx.send(reply.unwrap_or(None));
        }
    });
    let ask = |bytes: Vec<u8>| -> Result<Option<Value>, String> {
        req_tx.send(bytes).map_err(|_| "server thread gone".to_string())?;
        resp_rx.recv_timeout(PAYLOAD_DEADLINE).map_err(|_| "no answer within deadline".to_string())
    };
    let call = |tool: &str, args: Value| {
        json!({"jsonrpc": "2.0", "id": 1, "method": "tools/call", "params": {"name": tool, "arguments": args}})
            .to_string()
            .into_bytes()
    };
    req_tx
        .send(call("index_repository", json!({"wait": true, "cochange": false, "project": "fixture"})))
        .unwrap();
    let indexed = resp_rx.recv_timeout(Duration::from_secs(60)).ok().flatten();
    let indexed_ok = indexed.as_ref().is_some_and(|r| r.get("result").is_some());
    let nodes_before = Store::open(&db_path, OpenMode::ReadOnly).map(|s| s.count_nodes().unwrap()).unwrap_or(0);

    let mut crashes = 0;
    let mut hangs = 0;
    let mut unresponsive = 0;
    let mut traversal_accepted = 0;
    let mut leaked = 0;
    let mut slowest = Duration::ZERO;
    for p in &corpus {
        let started = Instant::now();
        match ask(p.bytes.clone()) {
            Ok(Some(reply)) => {
                if reply.get("error").is_none() && reply.get("result").is_none() {
                    crashes += 1;
                }
                if reply.to_string().contains("top secret") {
                    leaked += 1;
                }
                if p.category == "path_traversal" && reply.get("error").is_none() {
                    traversal_accepted += 1;
                }
            }
            Ok(None) => crashes += 1,
            Err(_) => hangs += 1,
        }
        slowest = slowest.max(started.elapsed());
        let probe = ask(call("search_graph", json!({"pattern": "checkout"})));
        let alive = matches!(&probe, Ok(Some(r)) if r["result"]["structuredContent"]["results"].as_array().is_some_and(|a| !a.is_empty()));
        if !alive {
            unresponsive += 1;
        }
    }
    drop(req_tx);
    let _ = worker.join();

    // ATTACH and DETACH are refused at the connection, alone or inside a
    // batch, and earlier statements in the batch keep their effect.
    let store = Store::open(&db_path, OpenMode::ReadWrite).unwrap();
    let denied = |sql: &str| matches!(store.execute_raw(sql), Err(codegraph::Error::QueryRejected(_)));
    let attach_denied = denied("ATTACH DATABASE '/tmp/evil.db' AS evil")
        && denied("DETACH DATABASE main")
        && denied("CREATE TABLE scratch(x); DETACH DATABASE main")
        && denied("SELECT 1; ATTACH DATABASE ':memory:' AS m");
    let prior_kept = store.conn().query_row("SELECT COUNT(*) FROM scratch", [], |r| r.get::<_, i64>(0)).is_ok();
    let graph_intact = store.count_nodes().unwrap() == nodes_before;
    let no_files = !Path::new("/tmp/evil.db").exists() && !Path::new("/tmp/pwned").exists();

    let pass = corpus.len() >= MIN_PAYLOADS
        && per_category.iter().all(|&c| c > 0)
        && indexed_ok
        && crashes == 0
        && hangs == 0
        && unresponsive == 0
        && traversal_accepted == 0
        && leaked == 0
        && attach_denied
        && prior_kept
        && graph_intact
        && no_files;
    outcome(
        pass,
        format!(
            "{} payloads {:?} across {} categories; crashes {crashes}, hangs {hangs}, unresponsive {unresponsive}, \
             slowest {:.0} ms; traversal accepted {traversal_accepted}, leaks {leaked}; ATTACH/DETACH denied {attach_denied} \
             (prior statement kept {prior_kept}); graph intact {graph_intact}",
            corpus.len(),
            per_category,
            CATEGORIES.len(),
            slowest.as_secs_f64() * 1000.0,
        ),
    )
}

// ---------------------------------------------------------------------------

fn determinism() -> Outcome {
    let repo = fixture_repo(9);
    let runs: Vec<_> = WORKER_COUNTS.iter().map(|&w| fresh_index(repo.path(), w)).collect();
    let graphs_equal = runs.windows(2).all(|w| w[0] == w[1]);
    let (nodes, edges) = (runs[0].0.nodes.len(), runs[0].0.edges.len());

    // Extraction is a pure function of (path, bytes).
    let scan = scan_repo(repo.path(), &LanguageFilter(None), &[]).unwrap();
    let copy = tempfile::tempdir().unwrap();
    copy_tree(repo.path(), copy.path());
    let mut idempotent = 0;
    for f in &scan.files {
        let bytes = std::fs::read(repo.path().join(&f.path)).unwrap();
        let a = adapter(f.language).unwrap();
        let first = extract_file(&f.path, &bytes, a);
        let second = extract_file(&f.path, &bytes, a);
        let elsewhere = extract_one(copy.path(), f).map(|(_, e)| e);
        let again = extract_one(repo.path(), f);
        if first == second && elsewhere.as_ref() == Some(&first) && again.is_some_and(|(_, e)| e == first) {
            idempotent += 1;
        }
    }
    let languages: std::collections::BTreeSet<&str> = scan.files.iter().map(|f| f.language).collect();
    let pass = graphs_equal && idempotent == scan.files.len();
    outcome(
        pass,
        format!(
            "workers {WORKER_COUNTS:?} give {} graphs ({nodes} nodes, {edges} edges, identical diagnostics {}); \
             {idempotent}/{} files extract identically ({})",
            if graphs_equal { "identical" } else { "different" },
            runs.windows(2).all(|w| w[0].1 == w[1].1),
            scan.files.len(),
            languages.into_iter().collect::<Vec<_>>().join(", "),
        ),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    type Check = fn() -> Outcome;
    let criteria: [(u8, &str, Check); 7] = [
        (1, "incremental sync converges to a fresh index", sync_convergence),
        (2, "resolution matches the brute-force cascade", resolution_equivalence),
        (3, "Louvain gain, fixtures and monotone moves", louvain_correctness),
        (4, "query and trace soundness", query_soundness),
        (5, "desk-scale performance", performance),
        (6, "adversarial robustness", robustness),
        (7, "determinism across worker counts", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let started = Instant::now();
        let o = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {verdict}: {name}: {} [{:.1} s]", o.detail, started.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    println!(
        "criterion 8 EXCLUDED: LLM answer-quality scores, token and tool-call ratios and adoption metrics \
         need live agents and human grading; not applicable to a deterministic suite"
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
