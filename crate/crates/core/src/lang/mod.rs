//! Syntax-tree extraction behind a pluggable language-adapter interface.
//!
//! Each adapter is mostly data: a grammar plus tree-sitter query sources for
//! definitions, call sites and usages. Import parsing and a handful of
//! language quirks live in small per-language hook functions.

mod c;
mod engine;
mod go;
mod python;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use tree_sitter::{Language, Query};

use crate::graph::{NodeLabel, Span};
use crate::resolve::types::TypeFacts;

pub use engine::generic_imports;
pub(crate) use go::dotted_import_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefKind {
    Function,
    Method,
    Class,
    Interface,
    Enum,
    Type,
}

impl DefKind {
    pub fn label(self) -> NodeLabel {
        match self {
            DefKind::Function => NodeLabel::Function,
            DefKind::Method => NodeLabel::Method,
            DefKind::Class => NodeLabel::Class,
            DefKind::Interface => NodeLabel::Interface,
            DefKind::Enum => NodeLabel::Enum,
            DefKind::Type => NodeLabel::Type,
        }
    }

    fn from_capture(name: &str) -> Option<DefKind> {
        Some(match name {
            "function" => DefKind::Function,
            "method" => DefKind::Method,
            "class" => DefKind::Class,
            "interface" => DefKind::Interface,
            "enum" => DefKind::Enum,
            "type" => DefKind::Type,
            _ => return None,
        })
    }

    pub fn is_callable(self) -> bool {
        matches!(self, DefKind::Function | DefKind::Method)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDefinition {
    pub kind: DefKind,
    pub simple_name: String,
    /// Enclosing definition names, outermost first. For receiver methods
    /// this is the receiver type.
    pub container_chain: Vec<String>,
    pub span: Span,
    pub signature: String,
    pub return_type: String,
    pub receiver: String,
    pub decorators: Vec<String>,
    pub is_exported: bool,
    pub is_test: bool,
    pub complexity: u32,
    /// Index of the syntactically enclosing definition in the same file.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCallSite {
    pub callee_text: String,
    pub enclosing_definition: Option<usize>,
    pub span: Span,
    pub is_method_call: bool,
    pub receiver_text: String,
    /// Launched asynchronously (`go f()`).
    pub is_async: bool,
    pub byte_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportEntry {
    pub local_alias: String,
    pub target_module_qname: String,
    /// Import text as written (module path, header name, package path).
    pub raw: String,
    pub span: Span,
    pub wildcard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UsageKind {
    Inherits,
    Decorates,
    UsesType,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawUsage {
    pub kind: UsageKind,
    pub symbol_text: String,
    pub span: Span,
    pub enclosing_definition: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRoute {
    pub method: String,
    pub path: String,
    pub handler: usize,
    pub span: Span,
}

/// Everything extracted from one source file. Pure function of
/// `(path, content)`; cached per file for incremental re-indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileExtraction {
    pub path: String,
    pub language: String,
    pub module_qname: String,
    pub line_count: u32,
    pub definitions: Vec<RawDefinition>,
    pub calls: Vec<RawCallSite>,
    pub imports: Vec<ImportEntry>,
    pub usages: Vec<RawUsage>,
    pub routes: Vec<RawRoute>,
    pub type_facts: Option<TypeFacts>,
}

impl FileExtraction {
    /// Qualified name of definition `idx`.
    pub fn qualified_name(&self, idx: usize) -> String {
        let def = &self.definitions[idx];
        let mut parts: Vec<&str> = Vec::with_capacity(def.container_chain.len() + 2);
        if !self.module_qname.is_empty() {
            parts.push(&self.module_qname);
        }
        parts.extend(def.container_chain.iter().map(String::as_str));
        parts.push(&def.simple_name);
        let mut q = parts.join(".");
        // Go allows one `init` per file within a package.
        if self.language == "go" && def.simple_name == "init" && def.container_chain.is_empty() {
            let stem = self.path.rsplit('/').next().unwrap_or(&self.path).replace('.', "_");
            q.push('@');
            q.push_str(&stem);
        }
        q
    }
}

/// Per-language hooks that do not fit a declarative query.
pub(crate) struct Hooks {
    pub module_qname: fn(path: &str, root: tree_sitter::Node, src: &[u8]) -> String,
    pub imports: fn(root: tree_sitter::Node, src: &[u8], path: &str, module: &str) -> Vec<ImportEntry>,
    pub refine: fn(ext: &mut FileExtraction, root: tree_sitter::Node, src: &[u8], def_nodes: &[tree_sitter::Node]),
    pub is_exported: fn(def: &RawDefinition, parent: Option<&RawDefinition>, node: tree_sitter::Node, src: &[u8]) -> bool,
}

pub struct LanguageAdapter {
    pub language_id: &'static str,
    pub file_extensions: &'static [&'static str],
    grammar: Language,
    definitions: Query,
    calls: Query,
    usages: Query,
    /// Node kinds that add one to cyclomatic complexity.
    branch_kinds: &'static [&'static str],
    /// Binary-operator tokens that add one (`&&`, `||`).
    logical_ops: &'static [&'static str],
    /// Node kinds collected as type names inside `@usage.type` captures.
    type_name_kinds: &'static [&'static str],
    hooks: Hooks,
}

impl std::fmt::Debug for LanguageAdapter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LanguageAdapter")
            .field("language_id", &self.language_id)
            .field("file_extensions", &self.file_extensions)
            .finish()
    }
}

struct AdapterSource {
    language_id: &'static str,
    file_extensions: &'static [&'static str],
    grammar: fn() -> Language,
    definitions: &'static str,
    calls: &'static str,
    usages: &'static str,
    branch_kinds: &'static [&'static str],
    logical_ops: &'static [&'static str],
    type_name_kinds: &'static [&'static str],
    hooks: Hooks,
}

impl AdapterSource {
    fn build(self) -> LanguageAdapter {
        let grammar = (self.grammar)();
        let compile = |src: &str, what: &str| {
            Query::new(&grammar, src).unwrap_or_else(|e| {
                panic!("{} {what} query does not compile: {e}", self.language_id)
            })
        };
        LanguageAdapter {
            language_id: self.language_id,
            file_extensions: self.file_extensions,
            definitions: compile(self.definitions, "definition"),
            calls: compile(self.calls, "call"),
            usages: compile(self.usages, "usage"),
            grammar,
            branch_kinds: self.branch_kinds,
            logical_ops: self.logical_ops,
            type_name_kinds: self.type_name_kinds,
            hooks: self.hooks,
        }
    }
}

/// All compiled-in adapters.
pub fn adapters() -> &'static [LanguageAdapter] {
    static ADAPTERS: OnceLock<Vec<LanguageAdapter>> = OnceLock::new();
    ADAPTERS.get_or_init(|| {
        vec![
            python::source().build(),
            go::source().build(),
            c::source().build(),
        ]
    })
}

pub fn adapter(language_id: &str) -> Option<&'static LanguageAdapter> {
    adapters().iter().find(|a| a.language_id == language_id)
}

/// Maps a repository-relative path to a language by file extension.
pub fn detect_language(path: &str) -> Option<&'static str> {
    let name = path.rsplit(['/', '\\']).next()?;
    let (_, ext) = name.rsplit_once('.')?;
    adapters()
        .iter()
        .find(|a| a.file_extensions.contains(&ext))
        .map(|a| a.language_id)
}

/// Language allow-list. `None` enables every adapter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageFilter(pub Option<Vec<String>>);

impl LanguageFilter {
    pub const ENV: &'static str = "CODEGRAPH_LANGUAGES";

    /// Reads a comma-separated allow-list from `CODEGRAPH_LANGUAGES`.
    pub fn from_env() -> Self {
        match std::env::var(Self::ENV) {
            Ok(v) if !v.trim().is_empty() => LanguageFilter(Some(
                v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            )),
            _ => LanguageFilter(None),
        }
    }

    pub fn allows(&self, language_id: &str) -> bool {
        match &self.0 {
            None => true,
            Some(list) => list.iter().any(|l| l == language_id),
        }
    }

    pub fn detect(&self, path: &str) -> Option<&'static str> {
        detect_language(path).filter(|l| self.allows(l))
    }
}

pub fn extract_file(path: &str, content: &[u8], adapter: &LanguageAdapter) -> FileExtraction {
    engine::extract(path, content, adapter)
}

pub fn extract_definitions(content: &[u8], adapter: &LanguageAdapter) -> Vec<RawDefinition> {
    engine::extract(&placeholder_path(adapter), content, adapter).definitions
}

pub fn extract_call_sites(content: &[u8], adapter: &LanguageAdapter) -> Vec<RawCallSite> {
    engine::extract(&placeholder_path(adapter), content, adapter).calls
}

pub fn extract_imports(content: &[u8], adapter: &LanguageAdapter) -> Vec<ImportEntry> {
    engine::extract(&placeholder_path(adapter), content, adapter).imports
}

pub fn extract_usages(content: &[u8], adapter: &LanguageAdapter) -> Vec<RawUsage> {
    engine::extract(&placeholder_path(adapter), content, adapter).usages
}

fn placeholder_path(adapter: &LanguageAdapter) -> String {
    format!("input.{}", adapter.file_extensions[0])
}

/// `a/b/c.ext` → `a.b.c`; dots inside directory names become `_`.
pub(crate) fn dotted_module_path(path: &str) -> String {
    let without_ext = match path.rsplit_once('.') {
        Some((stem, _)) if !stem.ends_with('/') && !stem.is_empty() => stem,
        _ => path,
    };
    without_ext
        .split('/')
        .filter(|s| !s.is_empty())
        .map(|s| s.replace('.', "_"))
        .collect::<Vec<_>>()
        .join(".")
}

/// Test-file markers shared by the adapters.
pub(crate) fn is_test_path(path: &str) -> bool {
    let file = path.rsplit('/').next().unwrap_or(path);
    let stem = file.rsplit_once('.').map(|(s, _)| s).unwrap_or(file);
    stem.starts_with("test_")
        || stem.ends_with("_test")
        || path.split('/').any(|seg| seg == "tests" || seg == "test")
}

/// Definitions grouped by label, used in test assertions and summaries.
pub fn count_by_kind(defs: &[RawDefinition]) -> BTreeMap<DefKind, usize> {
    let mut m = BTreeMap::new();
    for d in defs {
        *m.entry(d.kind).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests;
