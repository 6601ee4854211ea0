//! Call and usage resolution: the definition registry, the six-strategy
//! name cascade and the scope-based receiver type pass.

mod cascade;
mod registry;
pub mod types;

use std::collections::BTreeMap;

pub use cascade::{
    fuzzy_match, import_distance, normalized_similarity, resolve_callee, resolve_with, ResolutionResult, Strategy,
    FUZZY_THRESHOLD,
};
pub use registry::{registry_build, DefRef, FunctionRegistry};

use crate::lang::ImportEntry;

/// Per-file alias → module map. Later imports of the same alias shadow
/// earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportMap {
    aliases: BTreeMap<String, String>,
    wildcards: Vec<String>,
}

impl ImportMap {
    pub fn from_entries(entries: &[ImportEntry], mapper: &ModuleMapper) -> Self {
        let mut map = ImportMap::default();
        for e in entries {
            let target = mapper.map(&e.target_module_qname);
            if e.wildcard {
                map.add_wildcard(&target);
            } else if e.local_alias != "_" {
                map.insert(&e.local_alias, &target);
            }
        }
        map
    }

    pub fn insert(&mut self, alias: &str, target: &str) {
        self.aliases.insert(alias.to_string(), target.to_string());
    }

    pub fn add_wildcard(&mut self, target: &str) {
        if !self.wildcards.iter().any(|w| w == target) {
            self.wildcards.push(target.to_string());
        }
    }

    pub fn lookup(&self, alias: &str) -> Option<&str> {
        self.aliases.get(alias).map(String::as_str)
    }

    pub fn wildcards(&self) -> &[String] {
        &self.wildcards
    }

    /// Every imported module, aliased or wildcard.
    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.aliases.values().chain(self.wildcards.iter()).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty() && self.wildcards.is_empty()
    }
}

/// Rewrites import targets into repository module names. Go imports carry
/// the module path from `go.mod`, which file-derived module names lack.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModuleMapper {
    /// (dotted module path, module name of the repository-root package)
    prefixes: Vec<(String, String)>,
}

impl ModuleMapper {
    pub fn add_go_module(&mut self, module_path: &str, root_package: &str) {
        let dotted = crate::lang::dotted_import_path(module_path);
        if !dotted.is_empty() {
            self.prefixes.push((dotted, root_package.to_string()));
            self.prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        }
    }

    pub fn map(&self, target: &str) -> String {
        for (prefix, root) in &self.prefixes {
            if target == prefix {
                return root.clone();
            }
            if let Some(rest) = target.strip_prefix(prefix.as_str()).and_then(|r| r.strip_prefix('.')) {
                return rest.to_string();
            }
        }
        target.to_string()
    }
}
