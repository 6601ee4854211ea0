//! Scope-based receiver type resolution for the statically typed adapter.
//!
//! The Go adapter lowers each file into [`TypeFacts`]: declared types,
//! lexical scopes with their bindings, and every `recv.method()` call with
//! the receiver expression in a small expression IR. This pass evaluates
//! receiver types bottom-up over that IR (scope-chain lookup, field and
//! method lookup through embedded types, return-type propagation through
//! call chains) and yields fully qualified callees that skip the name
//! cascade.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ImportMap;
use crate::lang::{DefKind, FileExtraction};

/// Receiver-expression IR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueExpr {
    Ident(String),
    Selector(Box<ValueExpr>, String),
    Call(Box<ValueExpr>),
    /// Composite literal of the named type (`T{}`, `&T{}`).
    Composite(String),
    /// Value with an explicitly written type (declarations, parameters).
    Typed(String),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeDeclKind {
    Struct,
    Interface,
    Named,
    Alias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub kind: TypeDeclKind,
    pub fields: Vec<(String, String)>,
    pub embedded: Vec<String>,
    pub methods: Vec<String>,
    pub underlying: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeFacts {
    pub parent: Option<usize>,
    pub bindings: Vec<(String, ValueExpr)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverCall {
    pub call_index: usize,
    pub receiver: ValueExpr,
    pub method: String,
    pub scope: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeFacts {
    pub types: Vec<TypeDecl>,
    /// Scope 0 is the package scope.
    pub scopes: Vec<ScopeFacts>,
    pub receiver_calls: Vec<ReceiverCall>,
}

/// Lexical scope view over a file's [`ScopeFacts`].
pub struct Scope<'a> {
    facts: &'a [ScopeFacts],
    id: usize,
}

impl<'a> Scope<'a> {
    pub fn new(facts: &'a [ScopeFacts], id: usize) -> Self {
        Scope { facts, id }
    }

    /// Innermost binding for `name`, with the scope that introduced it.
    pub fn lookup(&self, name: &str) -> Option<(&'a ValueExpr, usize)> {
        let mut current = Some(self.id);
        while let Some(id) = current {
            let scope = self.facts.get(id)?;
            if let Some((_, expr)) = scope.bindings.iter().rev().find(|(n, _)| n == name) {
                return Some((expr, id));
            }
            current = scope.parent;
        }
        None
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MethodInfo {
    /// `None` for interface method declarations and stubs.
    pub qualified_name: Option<String>,
    pub returns: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeInfo {
    pub fields: BTreeMap<String, Option<String>>,
    pub methods: BTreeMap<String, MethodInfo>,
    pub embedded: Vec<String>,
    pub alias_of: Option<String>,
    pub is_interface: bool,
    pub stub: bool,
}

/// Outcome of resolving one receiver call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedCall {
    /// Fully qualified graph definition.
    Resolved(String),
    /// Method on a standard-library stub type; no graph node exists.
    External(String),
}

const BUILTIN_TYPES: &[&str] = &[
    "bool", "byte", "complex64", "complex128", "error", "float32", "float64", "int", "int8",
    "int16", "int32", "int64", "rune", "string", "uint", "uint8", "uint16", "uint32", "uint64",
    "uintptr", "any",
];

/// Registry of type members across all files of the typed language.
#[derive(Debug, Clone, Default)]
pub struct TypeRegistry {
    pub types: HashMap<String, TypeInfo>,
    /// Function qualified name → resolved return type.
    pub functions: HashMap<String, Option<String>>,
}

/// Per-file naming context for turning type text into qualified names.
pub struct TypeContext<'a> {
    pub package: &'a str,
    pub imports: &'a ImportMap,
}

impl<'a> TypeContext<'a> {
    /// `*pkg.T[int]` → `<import target of pkg>.T`; builtins map to
    /// `builtin.<name>`; slices, maps, channels and func types are opaque.
    pub fn resolve(&self, text: &str) -> Option<String> {
        let mut t = text.trim();
        loop {
            let stripped = t.trim_start_matches(['*', '&']).trim();
            if let Some(inner) = stripped.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
                t = first_result(inner);
                continue;
            }
            t = stripped;
            break;
        }
        if t.is_empty()
            || t.starts_with('[')
            || t.starts_with("map[")
            || t.starts_with("chan")
            || t.starts_with("func")
            || t.starts_with("...")
            || t.starts_with("<-")
            || t.starts_with("struct")
            || t.starts_with("interface")
        {
            return None;
        }
        let t = t.split('[').next().unwrap_or(t).trim();
        match t.split_once('.') {
            Some((alias, name)) => {
                let module = self.imports.lookup(alias)?;
                Some(format!("{module}.{name}"))
            }
            None if BUILTIN_TYPES.contains(&t) => Some(format!("builtin.{t}")),
            None if self.package.is_empty() => Some(t.to_string()),
            None => Some(format!("{}.{t}", self.package)),
        }
    }
}

/// First element of a result list: `*T, error` → `*T`.
fn first_result(list: &str) -> &str {
    let mut depth = 0i32;
    for (i, c) in list.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => return list[..i].trim(),
            _ => {}
        }
    }
    // A named result (`err error`) keeps only the type.
    let trimmed = list.trim();
    match trimmed.split_once(' ') {
        Some((_, ty)) if !trimmed.starts_with("func") && !trimmed.starts_with("map") && !trimmed.starts_with("chan") => ty.trim(),
        _ => trimmed,
    }
}

impl TypeRegistry {
    /// Empty registry seeded with builtin and standard-library stubs.
    pub fn with_stubs() -> Self {
        let mut reg = TypeRegistry::default();
        for b in BUILTIN_TYPES {
            reg.add_stub(&format!("builtin.{b}"), &[]);
        }
        reg.add_stub("builtin.error", &[("Error", Some("builtin.string"))]);
        reg.add_stub(
            "strings.Builder",
            &[
                ("WriteString", Some("builtin.int")),
                ("WriteByte", Some("builtin.error")),
                ("String", Some("builtin.string")),
                ("Len", Some("builtin.int")),
                ("Reset", None),
            ],
        );
        reg.add_stub(
            "bytes.Buffer",
            &[
                ("Write", Some("builtin.int")),
                ("WriteString", Some("builtin.int")),
                ("String", Some("builtin.string")),
                ("Bytes", None),
                ("Len", Some("builtin.int")),
                ("Reset", None),
            ],
        );
        reg.add_stub("sync.Mutex", &[("Lock", None), ("Unlock", None)]);
        reg.add_stub(
            "sync.RWMutex",
            &[("Lock", None), ("Unlock", None), ("RLock", None), ("RUnlock", None)],
        );
        reg.add_stub("sync.WaitGroup", &[("Add", None), ("Done", None), ("Wait", None)]);
        reg.add_stub(
            "time.Time",
            &[
                ("Unix", Some("builtin.int64")),
                ("Format", Some("builtin.string")),
                ("Sub", Some("time.Duration")),
                ("Add", Some("time.Time")),
                ("Before", Some("builtin.bool")),
                ("After", Some("builtin.bool")),
            ],
        );
        reg.add_stub(
            "time.Duration",
            &[("Seconds", Some("builtin.float64")), ("String", Some("builtin.string"))],
        );
        for (f, ret) in [
            ("time.Now", "time.Time"),
            ("time.Since", "time.Duration"),
            ("errors.New", "builtin.error"),
            ("fmt.Errorf", "builtin.error"),
            ("fmt.Sprintf", "builtin.string"),
        ] {
            reg.functions.insert(f.to_string(), Some(ret.to_string()));
        }
        reg
    }

    fn add_stub(&mut self, qname: &str, methods: &[(&str, Option<&str>)]) {
        let info = self.types.entry(qname.to_string()).or_default();
        info.stub = true;
        for (m, ret) in methods {
            info.methods.insert(
                m.to_string(),
                MethodInfo {
                    qualified_name: None,
                    returns: ret.map(str::to_string),
                },
            );
        }
    }

    /// Registers the types, methods and functions declared in one file.
    pub fn add_file(&mut self, ext: &FileExtraction, imports: &ImportMap) {
        let Some(facts) = &ext.type_facts else { return };
        let ctx = TypeContext {
            package: &ext.module_qname,
            imports,
        };
        for decl in &facts.types {
            let qname = qualify(&ext.module_qname, &decl.name);
            let info = self.types.entry(qname).or_default();
            info.stub = false;
            info.is_interface = decl.kind == TypeDeclKind::Interface;
            for (name, ty) in &decl.fields {
                info.fields.insert(name.clone(), ctx.resolve(ty));
            }
            for e in &decl.embedded {
                if let Some(q) = ctx.resolve(e) {
                    info.embedded.push(q);
                }
            }
            for m in &decl.methods {
                info.methods.entry(m.clone()).or_default();
            }
            if decl.kind == TypeDeclKind::Alias {
                info.alias_of = ctx.resolve(&decl.underlying);
            }
        }
        for (i, def) in ext.definitions.iter().enumerate() {
            let returns = if def.return_type.is_empty() {
                None
            } else {
                ctx.resolve(&def.return_type)
            };
            match def.kind {
                DefKind::Method => {
                    let Some(recv) = def.container_chain.first() else { continue };
                    let type_q = qualify(&ext.module_qname, recv);
                    self.types.entry(type_q).or_default().methods.insert(
                        def.simple_name.clone(),
                        MethodInfo {
                            qualified_name: Some(ext.qualified_name(i)),
                            returns,
                        },
                    );
                }
                DefKind::Function if def.container_chain.is_empty() => {
                    self.functions.insert(ext.qualified_name(i), returns);
                }
                _ => {}
            }
        }
    }

    fn canonical<'s>(&'s self, ty: &'s str) -> &'s str {
        let mut current = ty;
        let mut seen = HashSet::new();
        while let Some(next) = self.types.get(current).and_then(|t| t.alias_of.as_deref()) {
            if !seen.insert(current) {
                break;
            }
            current = next;
        }
        current
    }

    /// Breadth-first walk over `ty` and its embedded types, visiting each
    /// type at most once.
    fn walk_embedded<T>(&self, ty: &str, mut f: impl FnMut(&TypeInfo) -> Option<T>) -> Option<T> {
        let mut queue = VecDeque::from([self.canonical(ty).to_string()]);
        let mut visited = HashSet::new();
        while let Some(t) = queue.pop_front() {
            if !visited.insert(t.clone()) {
                continue;
            }
            let Some(info) = self.types.get(&t) else { continue };
            if let Some(found) = f(info) {
                return Some(found);
            }
            for e in &info.embedded {
                queue.push_back(self.canonical(e).to_string());
            }
        }
        None
    }

    pub fn lookup_method(&self, ty: &str, name: &str) -> Option<(MethodInfo, bool)> {
        self.walk_embedded(ty, |info| info.methods.get(name).map(|m| (m.clone(), info.stub)))
    }

    pub fn lookup_field(&self, ty: &str, name: &str) -> Option<String> {
        self.walk_embedded(ty, |info| info.fields.get(name).cloned().flatten())
    }

    /// Method names of a type including promoted ones.
    pub fn method_set(&self, ty: &str) -> HashSet<String> {
        let mut out = HashSet::new();
        self.walk_embedded::<()>(ty, |info| {
            out.extend(info.methods.keys().cloned());
            None
        });
        out
    }
}

fn qualify(package: &str, name: &str) -> String {
    if package.is_empty() {
        name.to_string()
    } else {
        format!("{package}.{name}")
    }
}

const MAX_EVAL_DEPTH: usize = 32;

struct Evaluator<'a> {
    facts: &'a TypeFacts,
    ctx: TypeContext<'a>,
    registry: &'a TypeRegistry,
}

impl<'a> Evaluator<'a> {
    fn type_of(&self, expr: &ValueExpr, scope: usize, depth: usize) -> Option<String> {
        if depth > MAX_EVAL_DEPTH {
            return None;
        }
        match expr {
            ValueExpr::Typed(t) | ValueExpr::Composite(t) => self.ctx.resolve(t),
            ValueExpr::Ident(name) => {
                let (bound, at) = Scope::new(&self.facts.scopes, scope).lookup(name)?;
                self.type_of(bound, at, depth + 1)
            }
            ValueExpr::Selector(base, field) => {
                if let Some(pkg) = self.package_alias(base, scope) {
                    // Package-level variable of another package: not tracked.
                    let _ = pkg;
                    return None;
                }
                let ty = self.type_of(base, scope, depth + 1)?;
                self.registry.lookup_field(&ty, field)
            }
            ValueExpr::Call(callee) => match callee.as_ref() {
                ValueExpr::Ident(f) if Scope::new(&self.facts.scopes, scope).lookup(f).is_none() => {
                    let q = qualify(self.ctx.package, f);
                    self.registry.functions.get(&q).cloned().flatten()
                }
                ValueExpr::Selector(base, name) => {
                    if let Some(module) = self.package_alias(base, scope) {
                        let q = format!("{module}.{name}");
                        return self.registry.functions.get(&q).cloned().flatten();
                    }
                    let ty = self.type_of(base, scope, depth + 1)?;
                    self.registry.lookup_method(&ty, name)?.0.returns
                }
                _ => None,
            },
            ValueExpr::Unknown => None,
        }
    }

    /// `alias` when `expr` is an unshadowed identifier naming an import.
    fn package_alias(&self, expr: &ValueExpr, scope: usize) -> Option<String> {
        let ValueExpr::Ident(name) = expr else { return None };
        if Scope::new(&self.facts.scopes, scope).lookup(name).is_some() {
            return None;
        }
        self.ctx.imports.lookup(name).map(str::to_string)
    }
}

/// Resolves receiver calls of one file. Keys are indexes into
/// `ext.calls`; calls whose receiver type is unknown are absent and fall
/// back to the name cascade.
pub fn type_resolve_calls(
    ext: &FileExtraction,
    imports: &ImportMap,
    registry: &TypeRegistry,
) -> BTreeMap<usize, TypedCall> {
    let mut out = BTreeMap::new();
    let Some(facts) = &ext.type_facts else { return out };
    let eval = Evaluator {
        facts,
        ctx: TypeContext {
            package: &ext.module_qname,
            imports,
        },
        registry,
    };
    for rc in &facts.receiver_calls {
        if eval.package_alias(&rc.receiver, rc.scope).is_some() {
            continue;
        }
        let Some(ty) = eval.type_of(&rc.receiver, rc.scope, 0) else { continue };
        let Some((method, stub)) = registry.lookup_method(&ty, &rc.method) else { continue };
        let resolved = match method.qualified_name {
            Some(q) => TypedCall::Resolved(q),
            None if stub => TypedCall::External(format!("{}.{}", registry.canonical(&ty), rc.method)),
            None => continue,
        };
        out.insert(rc.call_index, resolved);
    }
    out
}
