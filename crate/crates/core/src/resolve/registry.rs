use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::graph::NodeLabel;

/// Where a registered definition lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefRef {
    pub qualified_name: String,
    pub simple_name: String,
    pub module: String,
    pub label: NodeLabel,
}

/// Exact and simple-name indexes over definitions.
#[derive(Debug, Default)]
pub struct FunctionRegistry {
    pub exact: HashMap<String, DefRef>,
    /// Simple name → qualified names, sorted.
    pub by_simple_name: HashMap<String, Vec<String>>,
    /// Distinct simple names bucketed by char length, for fuzzy search.
    fuzzy_index: OnceLock<Vec<Vec<String>>>,
    /// Best fuzzy simple-name match per queried name.
    fuzzy_cache: Mutex<HashMap<String, Option<(String, f64)>>>,
}

impl Clone for FunctionRegistry {
    fn clone(&self) -> Self {
        FunctionRegistry {
            exact: self.exact.clone(),
            by_simple_name: self.by_simple_name.clone(),
            fuzzy_index: OnceLock::new(),
            fuzzy_cache: Mutex::new(HashMap::new()),
        }
    }
}

/// Builds a registry; a repeated qualified name is an error.
pub fn registry_build(defs: impl IntoIterator<Item = DefRef>) -> Result<FunctionRegistry> {
    let mut reg = FunctionRegistry::default();
    for d in defs {
        if reg.exact.contains_key(&d.qualified_name) {
            return Err(Error::DuplicateQualifiedName(d.qualified_name));
        }
        reg.insert_unchecked(d);
    }
    reg.finish();
    Ok(reg)
}

impl FunctionRegistry {
    /// Builds a registry keeping the first definition of each qualified
    /// name. Used by the pipeline, where duplicates (redefinitions, header
    /// and source sharing a module) are legal source code.
    pub fn build_first_wins(defs: impl IntoIterator<Item = DefRef>) -> FunctionRegistry {
        let mut reg = FunctionRegistry::default();
        for d in defs {
            if !reg.exact.contains_key(&d.qualified_name) {
                reg.insert_unchecked(d);
            }
        }
        reg.finish();
        reg
    }

    fn insert_unchecked(&mut self, d: DefRef) {
        self.by_simple_name
            .entry(d.simple_name.clone())
            .or_default()
            .push(d.qualified_name.clone());
        self.exact.insert(d.qualified_name.clone(), d);
    }

    fn finish(&mut self) {
        for list in self.by_simple_name.values_mut() {
            list.sort();
        }
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    pub fn contains(&self, qname: &str) -> bool {
        self.exact.contains_key(qname)
    }

    pub fn get(&self, qname: &str) -> Option<&DefRef> {
        self.exact.get(qname)
    }

    pub fn candidates(&self, simple_name: &str) -> &[String] {
        self.by_simple_name.get(simple_name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Module of a registered name, or the name minus its last segment.
    pub fn module_of<'a>(&'a self, qname: &'a str) -> &'a str {
        match self.exact.get(qname) {
            Some(d) => &d.module,
            None => qname.rsplit_once('.').map(|(m, _)| m).unwrap_or(""),
        }
    }

    pub(crate) fn fuzzy_buckets(&self) -> &[Vec<String>] {
        self.fuzzy_index.get_or_init(|| {
            let mut names: Vec<&String> = self.by_simple_name.keys().collect();
            names.sort();
            let mut buckets: Vec<Vec<String>> = Vec::new();
            for n in names {
                let len = n.chars().count();
                if buckets.len() <= len {
                    buckets.resize(len + 1, Vec::new());
                }
                buckets[len].push(n.clone());
            }
            buckets
        })
    }

    pub(crate) fn fuzzy_cached(
        &self,
        name: &str,
        compute: impl FnOnce() -> Option<(String, f64)>,
    ) -> Option<(String, f64)> {
        if let Some(hit) = self.fuzzy_cache.lock().ok().and_then(|c| c.get(name).cloned()) {
            return hit;
        }
        let value = compute();
        if let Ok(mut cache) = self.fuzzy_cache.lock() {
            cache.insert(name.to_string(), value.clone());
        }
        value
    }
}
