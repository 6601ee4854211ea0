//! Phases 2 and 3 over already-extracted files: definition nodes, the
//! registries built at the barrier, and per-file resolution into private
//! buffers.

use std::collections::{BTreeMap, HashMap};

use crate::error::Result;
use crate::graph::{buffer_merge, EdgeType, GraphBuffer, GraphNode, NodeLabel, Properties};
use crate::lang::{FileExtraction, RawDefinition, UsageKind};
use crate::par;
use crate::resolve::types::{type_resolve_calls, TypeRegistry, TypedCall};
use crate::resolve::{resolve_callee, resolve_with, DefRef, FunctionRegistry, ImportMap, ModuleMapper};
use crate::store::Diagnostics;

use super::structure::file_qname;

/// Which definitions become nodes. The first definition (in file order) of
/// a qualified name claims it; later definitions with the same name and
/// label fold into that node, and ones with a different label are dropped.
pub struct Claims {
    /// Per file, per definition: the node qualified name it maps to.
    pub qnames: Vec<Vec<Option<String>>>,
    /// Per file, per definition: whether it owns its node.
    pub owner: Vec<Vec<bool>>,
    pub labels: HashMap<String, NodeLabel>,
}

pub fn claim_definitions(files: &[FileExtraction]) -> Claims {
    let mut labels: HashMap<String, NodeLabel> = HashMap::new();
    let mut qnames = Vec::with_capacity(files.len());
    let mut owner = Vec::with_capacity(files.len());
    for ext in files {
        let mut q = Vec::with_capacity(ext.definitions.len());
        let mut o = Vec::with_capacity(ext.definitions.len());
        for (i, def) in ext.definitions.iter().enumerate() {
            let name = ext.qualified_name(i);
            let label = def.kind.label();
            match labels.get(&name) {
                None => {
                    labels.insert(name.clone(), label);
                    q.push(Some(name));
                    o.push(true);
                }
                Some(l) if *l == label => {
                    q.push(Some(name));
                    o.push(false);
                }
                Some(_) => {
                    q.push(None);
                    o.push(false);
                }
            }
        }
        qnames.push(q);
        owner.push(o);
    }
    Claims { qnames, owner, labels }
}

fn definition_node(ext: &FileExtraction, def: &RawDefinition, qname: &str) -> GraphNode {
    let mut props = Properties::new();
    let mut put = |k: &str, v: String| {
        if !v.is_empty() {
            props.insert(k.to_string(), v);
        }
    };
    put("signature", def.signature.clone());
    put("return_type", def.return_type.clone());
    put("receiver", def.receiver.clone());
    put("decorators", def.decorators.join(","));
    put("exported", def.is_exported.to_string());
    put("is_test", def.is_test.to_string());
    put("complexity", def.complexity.to_string());
    put("language", ext.language.clone());
    let mut n = GraphNode::new(def.kind.label(), qname)
        .with_simple_name(def.simple_name.clone())
        .with_file(ext.path.clone(), def.span);
    n.properties = props;
    n
}

/// Phase 2 node construction: definition nodes in file order, built in
/// per-worker buffers and merged behind `base`.
pub fn definition_nodes(base: GraphBuffer, files: &[FileExtraction], claims: &Claims, workers: usize) -> Result<GraphBuffer> {
    let indices: Vec<usize> = (0..files.len()).collect();
    let parts = par::fold_chunks(
        workers,
        &indices,
        || Ok(GraphBuffer::new()),
        |acc: Result<GraphBuffer>, &f| {
            let mut b = acc?;
            let ext = &files[f];
            for (d, def) in ext.definitions.iter().enumerate() {
                if claims.owner[f][d] {
                    if let Some(q) = &claims.qnames[f][d] {
                        b.add_node(definition_node(ext, def, q))?;
                    }
                }
            }
            Ok(b)
        },
    );
    let mut all = vec![base];
    for p in parts {
        all.push(p?);
    }
    buffer_merge(all)
}

/// Lookups shared read-only by resolution workers, built at the
/// phase 2/3 barrier.
pub struct Resolver {
    pub functions: FunctionRegistry,
    pub types: FunctionRegistry,
    pub import_maps: Vec<ImportMap>,
    pub typed: Option<TypeRegistry>,
    pub mapper: ModuleMapper,
    /// Module name → indexes of the files defining it.
    pub modules: HashMap<String, Vec<usize>>,
}

/// Maps Go import paths onto repository module names using each `go.mod`,
/// given as (directory, module path).
pub fn module_mapper(files: &[FileExtraction], go_modules: &[(String, String)]) -> ModuleMapper {
    let mut mapper = ModuleMapper::default();
    for (dir, module_path) in go_modules {
        // Root-level Go files take their package name as module name.
        let root_package = if dir.is_empty() {
            files
                .iter()
                .find(|f| f.language == "go" && !f.path.contains('/'))
                .map(|f| f.module_qname.clone())
                .unwrap_or_default()
        } else {
            crate::lang::dotted_import_path(dir)
        };
        mapper.add_go_module(module_path, &root_package);
    }
    mapper
}

pub fn build_resolver(files: &[FileExtraction], claims: &Claims, go_modules: &[(String, String)]) -> Resolver {
    let mut callables = Vec::new();
    let mut type_defs = Vec::new();
    for (f, ext) in files.iter().enumerate() {
        for (d, def) in ext.definitions.iter().enumerate() {
            let Some(q) = &claims.qnames[f][d] else { continue };
            if !claims.owner[f][d] {
                continue;
            }
            let r = DefRef {
                qualified_name: q.clone(),
                simple_name: def.simple_name.clone(),
                module: ext.module_qname.clone(),
                label: def.kind.label(),
            };
            let label = def.kind.label();
            // Classes are callable as constructors.
            if label.is_callable() || label == NodeLabel::Class {
                callables.push(r.clone());
            }
            if label.is_type_like() {
                type_defs.push(r);
            }
        }
    }
    let mapper = module_mapper(files, go_modules);
    let import_maps: Vec<ImportMap> = files.iter().map(|f| ImportMap::from_entries(&f.imports, &mapper)).collect();
    let typed = files.iter().any(|f| f.type_facts.is_some()).then(|| {
        let mut reg = TypeRegistry::with_stubs();
        for (f, ext) in files.iter().enumerate() {
            reg.add_file(ext, &import_maps[f]);
        }
        reg
    });
    let mut modules: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, f) in files.iter().enumerate() {
        modules.entry(f.module_qname.clone()).or_default().push(i);
    }
    Resolver {
        functions: FunctionRegistry::build_first_wins(callables),
        types: FunctionRegistry::build_first_wins(type_defs),
        import_maps,
        typed,
        modules,
        mapper,
    }
}

fn strategy_props(strategy: &str) -> Properties {
    Properties::from([("strategy".to_string(), strategy.to_string())])
}

/// Rewrites `self.x` / `cls.x` inside a class body to `Class.x`.
fn rewrite_self(ext: &FileExtraction, callee: &str, enclosing: Option<usize>) -> Option<String> {
    if ext.language != "python" {
        return None;
    }
    let rest = callee.strip_prefix("self.").or_else(|| callee.strip_prefix("cls."))?;
    let def = &ext.definitions[enclosing?];
    if def.container_chain.is_empty() {
        return None;
    }
    Some(format!("{}.{rest}", def.container_chain.join(".")))
}

/// Resolution output of one worker.
#[derive(Default)]
pub struct ResolvedPart {
    pub buffer: GraphBuffer,
    pub diagnostics: Vec<(String, Diagnostics)>,
}

struct Ctx<'a> {
    base: &'a GraphBuffer,
    out: GraphBuffer,
}

impl Ctx<'_> {
    fn node(&mut self, qname: &str) -> Result<Option<crate::graph::TempId>> {
        match self.base.lookup(qname) {
            Some(id) => Ok(Some(self.out.adopt(self.base.node(id))?)),
            None => Ok(None),
        }
    }

    fn edge(&mut self, src: &str, dst: &str, ty: EdgeType, conf: f64, props: Properties) -> Result<()> {
        if src == dst && !ty.is_call() {
            return Ok(());
        }
        if let (Some(s), Some(d)) = (self.node(src)?, self.node(dst)?) {
            self.out.add_edge_with(s, d, ty, conf, props)?;
        }
        Ok(())
    }
}

fn resolve_file(
    ctx: &mut Ctx<'_>,
    f: usize,
    files: &[FileExtraction],
    claims: &Claims,
    r: &Resolver,
) -> Result<Diagnostics> {
    let ext = &files[f];
    let file = file_qname(&ext.path);
    let imports = &r.import_maps[f];
    let module = ext.module_qname.as_str();
    let qn = |d: Option<usize>| d.and_then(|d| claims.qnames[f][d].clone());

    // Containment of definitions.
    for (d, def) in ext.definitions.iter().enumerate() {
        let Some(q) = qn(Some(d)) else { continue };
        ctx.edge(&file, &q, EdgeType::Defines, 1.0, Properties::new())?;
        if def.kind == crate::lang::DefKind::Method {
            let container = match def.parent.and_then(|p| qn(Some(p))) {
                Some(p) => Some(p),
                None if !def.container_chain.is_empty() => {
                    let mut parts: Vec<&str> = Vec::new();
                    if !module.is_empty() {
                        parts.push(module);
                    }
                    parts.extend(def.container_chain.iter().map(String::as_str));
                    Some(parts.join("."))
                }
                None => None,
            };
            if let Some(c) = container.filter(|c| claims.labels.get(c).is_some_and(|l| l.is_type_like())) {
                ctx.edge(&c, &q, EdgeType::DefinesMethod, 1.0, Properties::new())?;
            }
        }
    }

    // Imports between files.
    for imp in &ext.imports {
        let target = r.mapper.map(&imp.target_module_qname);
        let hits = r.modules.get(&target).or_else(|| {
            target
                .rsplit_once('.')
                .and_then(|(parent, _)| r.modules.get(parent))
        });
        for &g in hits.into_iter().flatten() {
            if g != f {
                ctx.edge(&file, &file_qname(&files[g].path), EdgeType::Imports, 1.0, Properties::new())?;
            }
        }
    }

    // Calls.
    let typed = match &r.typed {
        Some(reg) if ext.type_facts.is_some() => type_resolve_calls(ext, imports, reg),
        _ => BTreeMap::new(),
    };
    let mut diag = Diagnostics::default();
    for (i, call) in ext.calls.iter().enumerate() {
        let source = qn(call.enclosing_definition);
        let (target, conf, strategy) = match typed.get(&i) {
            Some(TypedCall::External(_)) => continue,
            Some(TypedCall::Resolved(q)) if ctx.base.lookup(q).is_some() => (Some(q.clone()), 1.0, "type"),
            _ => {
                let text = rewrite_self(ext, &call.callee_text, call.enclosing_definition)
                    .unwrap_or_else(|| call.callee_text.clone());
                let res = resolve_callee(&r.functions, &text, imports, module);
                (res.target_qname, res.confidence, res.strategy.as_str())
            }
        };
        diag.call_sites += 1;
        let Some(target) = target else {
            diag.unresolved_calls += 1;
            continue;
        };
        diag.resolved_calls += 1;
        *diag.by_strategy.entry(strategy.to_string()).or_default() += 1;
        let (src, ty) = match source {
            Some(s) => (s, if call.is_async { EdgeType::AsyncCalls } else { EdgeType::Calls }),
            None => (file.clone(), EdgeType::Usage),
        };
        ctx.edge(&src, &target, ty, conf, strategy_props(strategy))?;
    }

    // Usages.
    for u in &ext.usages {
        let source = qn(u.enclosing_definition).unwrap_or_else(|| file.clone());
        let (registry, last) = match u.kind {
            UsageKind::Inherits | UsageKind::UsesType => (&r.types, 5),
            UsageKind::Decorates | UsageKind::Reference => (&r.functions, 3),
        };
        let res = resolve_with(registry, &u.symbol_text, imports, module, last);
        let Some(target) = res.target_qname else { continue };
        let props = strategy_props(res.strategy.as_str());
        match u.kind {
            UsageKind::Inherits => ctx.edge(&source, &target, EdgeType::Inherits, res.confidence, props)?,
            UsageKind::UsesType => ctx.edge(&source, &target, EdgeType::UsesType, res.confidence, props)?,
            UsageKind::Reference => ctx.edge(&source, &target, EdgeType::Usage, res.confidence, props)?,
            UsageKind::Decorates => {
                ctx.edge(&target, &source, EdgeType::Decorates, res.confidence, props.clone())?;
                ctx.edge(&source, &target, EdgeType::Usage, res.confidence, props)?;
            }
        }
    }
    Ok(diag)
}

/// Phase 3: resolves every file against the shared registries. Endpoints
/// are adopted from `base`, so merging `[base, parts...]` yields the full
/// graph.
pub fn resolve_all(
    base: &GraphBuffer,
    files: &[FileExtraction],
    claims: &Claims,
    resolver: &Resolver,
    workers: usize,
) -> Result<Vec<ResolvedPart>> {
    let indices: Vec<usize> = (0..files.len()).collect();
    let parts = par::fold_chunks(
        workers,
        &indices,
        || Ok(ResolvedPart::default()),
        |acc: Result<ResolvedPart>, &f| {
            let mut part = acc?;
            let mut ctx = Ctx {
                base,
                out: std::mem::take(&mut part.buffer),
            };
            let diag = resolve_file(&mut ctx, f, files, claims, resolver)?;
            part.buffer = ctx.out;
            part.diagnostics.push((files[f].path.clone(), diag));
            Ok(part)
        },
    );
    parts.into_iter().collect()
}
