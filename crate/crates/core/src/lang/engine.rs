use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use streaming_iterator::StreamingIterator;
use tree_sitter::{Node, Parser, QueryCursor};

use super::{
    is_test_path, DefKind, FileExtraction, ImportEntry, LanguageAdapter, RawCallSite,
    RawDefinition, RawUsage, UsageKind,
};
use crate::graph::Span;

const SIGNATURE_MAX: usize = 240;

pub(crate) fn text<'a>(node: Node, src: &'a [u8]) -> std::borrow::Cow<'a, str> {
    String::from_utf8_lossy(&src[node.byte_range()])
}

pub(crate) fn span_of(node: Node) -> Span {
    Span::new(
        node.start_position().row as u32 + 1,
        node.end_position().row as u32 + 1,
    )
}

pub(crate) fn line_count(src: &[u8]) -> u32 {
    if src.is_empty() {
        return 0;
    }
    let newlines = src.iter().filter(|b| **b == b'\n').count() as u32;
    if src.ends_with(b"\n") {
        newlines
    } else {
        newlines + 1
    }
}

struct DefCapture<'t> {
    node: Node<'t>,
    span_node: Node<'t>,
    kind: DefKind,
    name: String,
    params: Option<Node<'t>>,
    ret: Option<Node<'t>>,
    receiver: Option<Node<'t>>,
    body: Option<Node<'t>>,
}

pub(super) fn extract(path: &str, content: &[u8], adapter: &LanguageAdapter) -> FileExtraction {
    let mut ext = FileExtraction {
        path: path.to_string(),
        language: adapter.language_id.to_string(),
        module_qname: String::new(),
        line_count: line_count(content),
        definitions: Vec::new(),
        calls: Vec::new(),
        imports: Vec::new(),
        usages: Vec::new(),
        routes: Vec::new(),
        type_facts: None,
    };
    let mut parser = Parser::new();
    if parser.set_language(&adapter.grammar).is_err() {
        return ext;
    }
    let Some(tree) = parser.parse(content, None) else {
        return ext;
    };
    let root = tree.root_node();
    ext.module_qname = (adapter.hooks.module_qname)(path, root, content);

    let captures = collect_definitions(adapter, root, content);
    let mut index_of: HashMap<usize, usize> = HashMap::new();
    for (i, d) in captures.iter().enumerate() {
        index_of.insert(d.node.id(), i);
        index_of.insert(d.span_node.id(), i);
    }
    let def_ids: std::collections::HashSet<usize> = captures.iter().map(|d| d.node.id()).collect();

    for (i, d) in captures.iter().enumerate() {
        let parent = enclosing(d.span_node.parent(), &index_of);
        let container_chain = match parent {
            Some(p) => {
                let pd: &RawDefinition = &ext.definitions[p];
                let mut chain = pd.container_chain.clone();
                chain.push(pd.simple_name.clone());
                chain
            }
            None => Vec::new(),
        };
        debug_assert!(parent.is_none_or(|p| p < i));
        ext.definitions.push(RawDefinition {
            kind: d.kind,
            simple_name: d.name.clone(),
            container_chain,
            span: span_of(d.span_node),
            signature: signature(d, content),
            return_type: d.ret.map(|n| collapse_ws(&text(n, content))).unwrap_or_default(),
            receiver: d.receiver.map(|n| collapse_ws(&text(n, content))).unwrap_or_default(),
            decorators: Vec::new(),
            is_exported: false,
            is_test: false,
            complexity: complexity(adapter, d.node, &def_ids),
            parent,
        });
    }

    ext.calls = collect_calls(adapter, root, content, &index_of);
    ext.usages = collect_usages(adapter, root, content, &index_of);
    ext.imports = (adapter.hooks.imports)(root, content, path, &ext.module_qname);
    let fallback = error_region_imports(root, content, &ext.module_qname);
    for entry in fallback {
        if !ext.imports.iter().any(|i| i.span.start_line == entry.span.start_line) {
            ext.imports.push(entry);
        }
    }
    ext.imports.sort_by_key(|i| i.span.start_line);

    let def_nodes: Vec<Node> = captures.iter().map(|d| d.node).collect();
    (adapter.hooks.refine)(&mut ext, root, content, &def_nodes);

    let test_file = is_test_path(path);
    #[allow(clippy::needless_range_loop)]
    for i in 0..ext.definitions.len() {
        // Parents precede children, so their flag is already final.
        let parent = ext.definitions[i].parent.map(|p| &ext.definitions[p]);
        let exported = (adapter.hooks.is_exported)(&ext.definitions[i], parent, def_nodes[i], content);
        let def = &mut ext.definitions[i];
        def.is_exported = exported;
        def.is_test = test_file && is_test_name(def);
    }
    ext
}

fn is_test_name(def: &RawDefinition) -> bool {
    let n = def.simple_name.as_str();
    match def.kind {
        DefKind::Function | DefKind::Method => {
            n.starts_with("test") || n.starts_with("Test") || n.starts_with("Benchmark")
        }
        DefKind::Class => n.starts_with("Test"),
        _ => false,
    }
}

fn enclosing(mut node: Option<Node>, index_of: &HashMap<usize, usize>) -> Option<usize> {
    while let Some(n) = node {
        if let Some(&i) = index_of.get(&n.id()) {
            return Some(i);
        }
        node = n.parent();
    }
    None
}

fn collect_definitions<'t>(
    adapter: &LanguageAdapter,
    root: Node<'t>,
    src: &[u8],
) -> Vec<DefCapture<'t>> {
    let names = adapter.definitions.capture_names();
    let mut cursor = QueryCursor::new();
    let mut matches = cursor.matches(&adapter.definitions, root, src);
    let mut out: Vec<DefCapture> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while let Some(m) = matches.next() {
        let mut def: Option<(Node, DefKind)> = None;
        let (mut name, mut params, mut ret, mut receiver, mut body) = (None, None, None, None, None);
        for cap in m.captures() {
            let cname = names[cap.index as usize];
            match cname {
                "name" => name = Some(cap.node),
                "params" => params = Some(cap.node),
                "return" => ret = Some(cap.node),
                "receiver" => receiver = Some(cap.node),
                "body" => body = Some(cap.node),
                other => {
                    if let Some(kind) = other.strip_prefix("def.").and_then(DefKind::from_capture) {
                        def = Some((cap.node, kind));
                    }
                }
            }
        }
        let (Some((node, kind)), Some(name)) = (def, name) else {
            continue;
        };
        if !seen.insert(node.id()) {
            continue;
        }
        let span_node = match node.parent() {
            Some(p) if p.kind() == "decorated_definition" => p,
            _ => node,
        };
        out.push(DefCapture {
            node,
            span_node,
            kind,
            name: text(name, src).into_owned(),
            params,
            ret,
            receiver,
            body: body.or_else(|| node.child_by_field_name("body")),
        });
    }
    out.sort_by_key(|d| (d.span_node.start_byte(), std::cmp::Reverse(d.span_node.end_byte())));
    out
}

fn signature(d: &DefCapture, src: &[u8]) -> String {
    let start = d.node.start_byte();
    let end = match d.body {
        Some(b) if b.start_byte() > start => b.start_byte(),
        _ => d.node.end_byte(),
    };
    let raw = String::from_utf8_lossy(&src[start..end]);
    let first_line_only = d.body.is_none();
    let raw = if first_line_only {
        raw.lines().next().unwrap_or("").to_string()
    } else {
        raw.into_owned()
    };
    let _ = d.params;
    let mut s = collapse_ws(raw.trim_end_matches([':', '{', ' ', '\n']));
    if s.len() > SIGNATURE_MAX {
        let mut cut = SIGNATURE_MAX;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// 1 + branch/loop/logical-operator nodes in the definition, not counting
/// nested definitions.
fn complexity(
    adapter: &LanguageAdapter,
    def: Node,
    def_ids: &std::collections::HashSet<usize>,
) -> u32 {
    let mut count = 1;
    let mut stack = vec![def];
    while let Some(n) = stack.pop() {
        if n.id() != def.id() && def_ids.contains(&n.id()) {
            continue;
        }
        let kind = n.kind();
        if adapter.branch_kinds.contains(&kind) {
            count += 1;
        } else if kind == "binary_expression" {
            if let Some(op) = n.child_by_field_name("operator") {
                if adapter.logical_ops.contains(&op.kind()) {
                    count += 1;
                }
            }
        }
        let mut cursor = n.walk();
        for child in n.named_children(&mut cursor) {
            stack.push(child);
        }
    }
    count
}

/// Normalizes a callee expression into a dotted token.
fn callee_parts(node: Node, src: &[u8]) -> Option<(String, bool, String)> {
    static DOTTED: OnceLock<Regex> = OnceLock::new();
    let dotted = DOTTED.get_or_init(|| {
        Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*(\s*(\.|->)\s*[A-Za-z_][A-Za-z0-9_]*)*$").unwrap()
    });
    let raw = text(node, src);
    if dotted.is_match(&raw) {
        let norm: String = raw.replace("->", ".").chars().filter(|c| !c.is_whitespace()).collect();
        let (receiver, is_method) = match norm.rsplit_once('.') {
            Some((r, _)) => (r.to_string(), true),
            None => (String::new(), false),
        };
        return Some((norm, is_method, receiver));
    }
    // Complex receiver (`a().b`, `x[i].m`): keep the member name only.
    for (member, object) in [("attribute", "object"), ("field", "operand"), ("field", "argument")] {
        if let (Some(m), Some(o)) = (node.child_by_field_name(member), node.child_by_field_name(object)) {
            let name = text(m, src).into_owned();
            if name.is_empty() {
                return None;
            }
            return Some((name, true, collapse_ws(&text(o, src))));
        }
    }
    None
}

fn collect_calls(
    adapter: &LanguageAdapter,
    root: Node,
    src: &[u8],
    index_of: &HashMap<usize, usize>,
) -> Vec<RawCallSite> {
    let names = adapter.calls.capture_names();
    let mut cursor = QueryCursor::new();
    let mut matches = cursor.matches(&adapter.calls, root, src);
    let mut out = Vec::new();
    while let Some(m) = matches.next() {
        let mut call = None;
        let mut callee = None;
        for cap in m.captures() {
            match names[cap.index as usize] {
                "call" => call = Some(cap.node),
                "callee" => callee = Some(cap.node),
                _ => {}
            }
        }
        let (Some(call), Some(callee)) = (call, callee) else {
            continue;
        };
        let Some((callee_text, is_method_call, receiver_text)) = callee_parts(callee, src) else {
            continue;
        };
        out.push(RawCallSite {
            callee_text,
            enclosing_definition: enclosing(call.parent(), index_of),
            span: span_of(call),
            is_method_call,
            receiver_text,
            is_async: call.parent().is_some_and(|p| p.kind() == "go_statement"),
            byte_range: (call.start_byte(), call.end_byte()),
        });
    }
    out.sort_by_key(|c| (c.byte_range.0, std::cmp::Reverse(c.byte_range.1)));
    out.dedup_by_key(|c| c.byte_range);
    out
}

fn collect_usages(
    adapter: &LanguageAdapter,
    root: Node,
    src: &[u8],
    index_of: &HashMap<usize, usize>,
) -> Vec<RawUsage> {
    let names = adapter.usages.capture_names();
    let mut cursor = QueryCursor::new();
    let mut matches = cursor.matches(&adapter.usages, root, src);
    let mut out: Vec<(usize, RawUsage)> = Vec::new();
    while let Some(m) = matches.next() {
        for cap in m.captures() {
            let kind = match names[cap.index as usize] {
                "usage.inherits" => UsageKind::Inherits,
                "usage.decorates" => UsageKind::Decorates,
                "usage.type" => UsageKind::UsesType,
                "usage.reference" => UsageKind::Reference,
                _ => continue,
            };
            let enclosing_definition = enclosing(cap.node.parent(), index_of);
            let symbols: Vec<(Node, String)> = match kind {
                UsageKind::UsesType | UsageKind::Inherits => {
                    type_names(adapter, cap.node, src)
                }
                _ => vec![(cap.node, collapse_ws(&text(cap.node, src)).replace(' ', ""))],
            };
            for (node, symbol_text) in symbols {
                if symbol_text.is_empty() {
                    continue;
                }
                out.push((
                    node.start_byte(),
                    RawUsage {
                        kind,
                        symbol_text,
                        span: span_of(node),
                        enclosing_definition,
                    },
                ));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.kind.cmp(&b.1.kind)));
    out.dedup();
    out.into_iter().map(|(_, u)| u).collect()
}

/// Maximal type-name nodes under `node`, as dotted text.
fn type_names<'t>(adapter: &LanguageAdapter, node: Node<'t>, src: &[u8]) -> Vec<(Node<'t>, String)> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if adapter.type_name_kinds.contains(&n.kind()) {
            let t: String = text(n, src).chars().filter(|c| !c.is_whitespace()).collect();
            out.push((n, t));
            continue;
        }
        let mut cursor = n.walk();
        let children: Vec<Node> = n.named_children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out
}

/// Best-effort import scan over regions the grammar could not parse.
fn error_region_imports(root: Node, src: &[u8], module: &str) -> Vec<ImportEntry> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if n.is_error() {
            let base_line = n.start_position().row as u32 + 1;
            for mut entry in generic_imports(&text(n, src), module) {
                entry.span = Span::new(entry.span.start_line + base_line - 1, entry.span.end_line + base_line - 1);
                out.push(entry);
            }
            continue;
        }
        if n.has_error() {
            let mut cursor = n.walk();
            let children: Vec<Node> = n.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    out
}

/// Generic fallback: pulls dotted module paths out of common import forms
/// (`import x.y`, `from x import y`, `#include "x.h"`, `use x::y`,
/// `require("x")`). Spans are relative to `text`.
pub fn generic_imports(text: &str, _module: &str) -> Vec<ImportEntry> {
    static PATTERNS: OnceLock<Vec<Regex>> = OnceLock::new();
    let patterns = PATTERNS.get_or_init(|| {
        [
            r#"^\s*from\s+([A-Za-z_][\w.]*)\s+import\s+([A-Za-z_]\w*)"#,
            r#"^\s*import\s+([A-Za-z_][\w.]*)(?:\s+as\s+([A-Za-z_]\w*))?"#,
            r#"^\s*#\s*include\s*[<"]([^>"]+)[>"]"#,
            r#"^\s*use\s+([A-Za-z_][\w:]*)"#,
            r#"require\(\s*['"]([^'"]+)['"]\s*\)"#,
        ]
        .iter()
        .map(|p| Regex::new(p).unwrap())
        .collect()
    });
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for (pi, re) in patterns.iter().enumerate() {
            let Some(caps) = re.captures(line) else { continue };
            let raw = caps[1].to_string();
            let module = raw
                .trim_end_matches(".h")
                .replace("::", ".")
                .replace(['/', '\\'], ".");
            let (alias, target) = match (pi, caps.get(2)) {
                (0, Some(name)) => (name.as_str().to_string(), format!("{module}.{}", name.as_str())),
                (_, Some(alias)) => (alias.as_str().to_string(), module.clone()),
                _ => (module.rsplit('.').next().unwrap_or(&module).to_string(), module.clone()),
            };
            out.push(ImportEntry {
                local_alias: alias,
                target_module_qname: target,
                raw,
                span: Span::new(i as u32 + 1, i as u32 + 1),
                wildcard: false,
            });
            break;
        }
    }
    out
}
