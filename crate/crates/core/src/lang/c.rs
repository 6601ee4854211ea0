//! C adapter.
//!
//! Module names are the path without extension, so `foo.h` and `foo.c`
//! share a module. `#include` is a wildcard import of the header's module.
//! Everything without `static` storage is exported.

use tree_sitter::Node;

use super::engine::{span_of, text};
use super::{dotted_module_path, AdapterSource, FileExtraction, Hooks, ImportEntry, RawDefinition};

const DEFINITIONS: &str = r#"
(function_definition
  type: (_) @return
  declarator: (function_declarator
    declarator: (identifier) @name
    parameters: (parameter_list) @params)
  body: (compound_statement) @body) @def.function
(function_definition
  type: (_) @return
  declarator: (pointer_declarator
    declarator: (function_declarator
      declarator: (identifier) @name
      parameters: (parameter_list) @params))
  body: (compound_statement) @body) @def.function
(function_definition
  type: (_) @return
  declarator: (pointer_declarator
    declarator: (pointer_declarator
      declarator: (function_declarator
        declarator: (identifier) @name
        parameters: (parameter_list) @params)))
  body: (compound_statement) @body) @def.function
(struct_specifier name: (type_identifier) @name body: (field_declaration_list) @body) @def.class
(union_specifier name: (type_identifier) @name body: (field_declaration_list) @body) @def.class
(enum_specifier name: (type_identifier) @name body: (enumerator_list) @body) @def.enum
(type_definition
  type: [(struct_specifier !name) (union_specifier !name)]
  declarator: (type_identifier) @name) @def.class
(type_definition type: (enum_specifier !name) declarator: (type_identifier) @name) @def.enum
(type_definition
  type: [(primitive_type) (type_identifier) (sized_type_specifier)]
  declarator: (type_identifier) @name) @def.type
"#;

const CALLS: &str = r#"
(call_expression function: (_) @callee) @call
"#;

const USAGES: &str = r#"
(parameter_declaration type: (_) @usage.type)
(function_definition type: (_) @usage.type)
(field_declaration type: (_) @usage.type)
(call_expression arguments: (argument_list (identifier) @usage.reference))
"#;

pub(super) fn source() -> AdapterSource {
    AdapterSource {
        language_id: "c",
        file_extensions: &["c", "h"],
        grammar: || tree_sitter_c::LANGUAGE.into(),
        definitions: DEFINITIONS,
        calls: CALLS,
        usages: USAGES,
        branch_kinds: &[
            "if_statement",
            "for_statement",
            "while_statement",
            "do_statement",
            "case_statement",
            "conditional_expression",
        ],
        logical_ops: &["&&", "||"],
        type_name_kinds: &["type_identifier"],
        hooks: Hooks {
            module_qname,
            imports,
            refine,
            is_exported,
        },
    }
}

fn module_qname(path: &str, _root: Node, _src: &[u8]) -> String {
    dotted_module_path(path)
}

/// Joins `rel` onto `dir`, folding `.` and `..` segments.
fn join_normalized(dir: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = dir.split('/').filter(|s| !s.is_empty()).collect();
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn imports(root: Node, src: &[u8], path: &str, _module: &str) -> Vec<ImportEntry> {
    let dir = path.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if n.kind() == "preproc_include" {
            let Some(p) = n.child_by_field_name("path") else { continue };
            let raw_text = text(p, src);
            let raw = raw_text.trim_matches(['"', '<', '>']).to_string();
            if raw.is_empty() {
                continue;
            }
            let resolved = if p.kind() == "string_literal" {
                join_normalized(dir, &raw)
            } else {
                raw.clone()
            };
            let target = dotted_module_path(&resolved);
            out.push(ImportEntry {
                local_alias: target.rsplit('.').next().unwrap_or(&target).to_string(),
                target_module_qname: target,
                raw,
                span: span_of(n),
                wildcard: true,
            });
            continue;
        }
        let mut cursor = n.walk();
        let children: Vec<Node> = n.named_children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out
}

fn refine(_ext: &mut FileExtraction, _root: Node, _src: &[u8], _def_nodes: &[Node]) {}

fn is_exported(_def: &RawDefinition, _parent: Option<&RawDefinition>, node: Node, src: &[u8]) -> bool {
    let mut cursor = node.walk();
    let is_static = node
        .children(&mut cursor)
        .any(|c| c.kind() == "storage_class_specifier" && text(c, src) == "static");
    !is_static
}
