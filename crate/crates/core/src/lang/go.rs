//! Go adapter.
//!
//! Module names are the package directory (`svc/user/*.go` → `svc.user`);
//! a package at the repository root falls back to its package clause.
//! Exported iff the name starts with an upper-case letter. This adapter
//! also lowers each file into [`TypeFacts`] for receiver type resolution.

use std::collections::HashMap;

use tree_sitter::Node;

use super::engine::{collapse_ws, span_of, text};
use super::{AdapterSource, DefKind, FileExtraction, Hooks, ImportEntry, RawDefinition};
use crate::resolve::types::{ReceiverCall, ScopeFacts, TypeDecl, TypeDeclKind, TypeFacts, ValueExpr};

const DEFINITIONS: &str = r#"
(function_declaration
  name: (identifier) @name
  parameters: (parameter_list) @params
  result: (_)? @return
  body: (block)? @body) @def.function
(method_declaration
  receiver: (parameter_list) @receiver
  name: (field_identifier) @name
  parameters: (parameter_list) @params
  result: (_)? @return
  body: (block)? @body) @def.method
(type_spec name: (type_identifier) @name type: (struct_type) @body) @def.class
(type_spec name: (type_identifier) @name type: (interface_type) @body) @def.interface
(type_spec
  name: (type_identifier) @name
  type: [(type_identifier) (qualified_type) (pointer_type) (slice_type) (map_type)
         (function_type) (channel_type) (array_type) (generic_type)]) @def.type
(type_alias name: (type_identifier) @name) @def.type
"#;

const CALLS: &str = r#"
(call_expression function: (_) @callee) @call
"#;

const USAGES: &str = r#"
(field_declaration name: (field_identifier) type: (_) @usage.type)
(field_declaration !name type: (_) @usage.inherits)
(interface_type (type_elem (type_identifier) @usage.inherits))
(interface_type (type_elem (qualified_type) @usage.inherits))
(parameter_declaration type: (_) @usage.type)
(function_declaration result: (_) @usage.type)
(method_declaration result: (_) @usage.type)
(composite_literal type: (_) @usage.type)
(call_expression arguments: (argument_list (identifier) @usage.reference))
"#;

pub(super) fn source() -> AdapterSource {
    AdapterSource {
        language_id: "go",
        file_extensions: &["go"],
        grammar: || tree_sitter_go::LANGUAGE.into(),
        definitions: DEFINITIONS,
        calls: CALLS,
        usages: USAGES,
        branch_kinds: &[
            "if_statement",
            "for_statement",
            "expression_case",
            "type_case",
            "communication_case",
        ],
        logical_ops: &["&&", "||"],
        type_name_kinds: &["type_identifier", "qualified_type"],
        hooks: Hooks {
            module_qname,
            imports,
            refine,
            is_exported,
        },
    }
}

/// Import path or directory → dotted module name. Dots inside a segment
/// (`example.com`) become `_` so the mapping matches file-derived names.
pub(crate) fn dotted_import_path(path: &str) -> String {
    path.split('/')
        .filter(|s| !s.is_empty())
        .map(|s| s.replace('.', "_"))
        .collect::<Vec<_>>()
        .join(".")
}

fn module_qname(path: &str, root: Node, src: &[u8]) -> String {
    let dir = path.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
    if !dir.is_empty() {
        return dotted_import_path(dir);
    }
    let mut cursor = root.walk();
    let clause = root.named_children(&mut cursor).find(|n| n.kind() == "package_clause");
    clause
        .and_then(|c| c.named_child(0))
        .map(|n| text(n, src).into_owned())
        .unwrap_or_default()
}

fn imports(root: Node, src: &[u8], _path: &str, _module: &str) -> Vec<ImportEntry> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if n.kind() == "import_spec" {
            let Some(path_node) = n.child_by_field_name("path") else { continue };
            let raw = text(path_node, src).trim_matches(['"', '`']).to_string();
            if raw.is_empty() {
                continue;
            }
            let target = dotted_import_path(&raw);
            let last = raw.rsplit('/').next().unwrap_or(&raw).to_string();
            let (alias, wildcard) = match n.child_by_field_name("name") {
                Some(name) => match name.kind() {
                    "dot" => ("*".to_string(), true),
                    "blank_identifier" => ("_".to_string(), false),
                    _ => (text(name, src).into_owned(), false),
                },
                None => (last, false),
            };
            out.push(ImportEntry {
                local_alias: alias,
                target_module_qname: target,
                raw,
                span: span_of(n),
                wildcard,
            });
            continue;
        }
        // Imports only appear at the top of a file.
        if n.kind() == "source_file" || n.kind().starts_with("import_") {
            let mut cursor = n.walk();
            let children: Vec<Node> = n.named_children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    out
}

/// `(s *Server[T])` → `*Server[T]`.
fn receiver_type(receiver: Node, src: &[u8]) -> Option<String> {
    let mut cursor = receiver.walk();
    let param = receiver
        .named_children(&mut cursor)
        .find(|c| c.kind() == "parameter_declaration")?;
    let ty = param.child_by_field_name("type")?;
    Some(collapse_ws(&text(ty, src)))
}

fn base_type_name(ty: &str) -> &str {
    let t = ty.trim_start_matches('*');
    t.split('[').next().unwrap_or(t).trim()
}

fn refine(ext: &mut FileExtraction, root: Node, src: &[u8], def_nodes: &[Node]) {
    for (def, node) in ext.definitions.iter_mut().zip(def_nodes) {
        if def.kind != DefKind::Method {
            continue;
        }
        if let Some(ty) = node.child_by_field_name("receiver").and_then(|r| receiver_type(r, src)) {
            def.container_chain = vec![base_type_name(&ty).to_string()];
            def.receiver = ty;
        }
    }
    let call_index: HashMap<(usize, usize), usize> = ext
        .calls
        .iter()
        .enumerate()
        .map(|(i, c)| (c.byte_range, i))
        .collect();
    let mut walker = FactWalker {
        src,
        call_index: &call_index,
        facts: TypeFacts {
            scopes: vec![ScopeFacts::default()],
            ..Default::default()
        },
    };
    walker.walk(root, 0);
    ext.type_facts = Some(walker.facts);
}

fn is_exported(def: &RawDefinition, _parent: Option<&RawDefinition>, _node: Node, _src: &[u8]) -> bool {
    def.simple_name.chars().next().is_some_and(char::is_uppercase)
}

struct FactWalker<'a> {
    src: &'a [u8],
    call_index: &'a HashMap<(usize, usize), usize>,
    facts: TypeFacts,
}

const SCOPE_KINDS: &[&str] = &[
    "function_declaration",
    "method_declaration",
    "func_literal",
    "function_type",
    "method_elem",
    "block",
    "if_statement",
    "for_statement",
    "expression_switch_statement",
    "type_switch_statement",
    "select_statement",
    "expression_case",
    "type_case",
    "default_case",
    "communication_case",
];

impl FactWalker<'_> {
    fn text(&self, n: Node) -> String {
        collapse_ws(&text(n, self.src))
    }

    fn new_scope(&mut self, parent: usize) -> usize {
        self.facts.scopes.push(ScopeFacts {
            parent: Some(parent),
            bindings: Vec::new(),
        });
        self.facts.scopes.len() - 1
    }

    fn bind(&mut self, scope: usize, name: String, value: ValueExpr) {
        if name != "_" {
            self.facts.scopes[scope].bindings.push((name, value));
        }
    }

    fn walk(&mut self, node: Node, scope: usize) {
        let scope = if SCOPE_KINDS.contains(&node.kind()) {
            self.new_scope(scope)
        } else {
            scope
        };
        match node.kind() {
            "type_spec" | "type_alias" => self.type_decl(node),
            "parameter_declaration" => {
                let ty = node.child_by_field_name("type").map(|t| self.text(t));
                let mut cursor = node.walk();
                let names: Vec<String> =
                    node.children_by_field_name("name", &mut cursor).map(|n| self.text(n)).collect();
                for name in names {
                    let value = ty.clone().map(ValueExpr::Typed).unwrap_or(ValueExpr::Unknown);
                    self.bind(scope, name, value);
                }
                return;
            }
            "variadic_parameter_declaration" => {
                if let Some(n) = node.child_by_field_name("name") {
                    let name = self.text(n);
                    self.bind(scope, name, ValueExpr::Unknown);
                }
                return;
            }
            "var_spec" | "const_spec" => self.var_spec(node, scope),
            "short_var_declaration" | "range_clause" => self.short_var(node, scope),
            "type_switch_statement" => {
                if let Some(alias) = node.child_by_field_name("alias") {
                    let mut cursor = alias.walk();
                    let names: Vec<String> = alias.named_children(&mut cursor).map(|n| self.text(n)).collect();
                    for name in names {
                        self.bind(scope, name, ValueExpr::Unknown);
                    }
                }
            }
            "call_expression" => self.receiver_call(node, scope),
            _ => {}
        }
        let mut cursor = node.walk();
        let children: Vec<Node> = node.named_children(&mut cursor).collect();
        for child in children {
            // Bindings are visited by their own handlers; values still need
            // walking for nested calls.
            self.walk(child, scope);
        }
    }

    fn type_decl(&mut self, node: Node) {
        let (Some(name), Some(ty)) = (node.child_by_field_name("name"), node.child_by_field_name("type")) else {
            return;
        };
        let mut decl = TypeDecl {
            name: self.text(name),
            kind: TypeDeclKind::Named,
            fields: Vec::new(),
            embedded: Vec::new(),
            methods: Vec::new(),
            underlying: self.text(ty),
        };
        if node.kind() == "type_alias" {
            decl.kind = TypeDeclKind::Alias;
        } else if ty.kind() == "struct_type" {
            decl.kind = TypeDeclKind::Struct;
            let mut stack = vec![ty];
            while let Some(n) = stack.pop() {
                if n.kind() == "field_declaration" {
                    let Some(fty) = n.child_by_field_name("type") else { continue };
                    let fty = self.text(fty);
                    let mut cursor = n.walk();
                    let names: Vec<String> =
                        n.children_by_field_name("name", &mut cursor).map(|x| self.text(x)).collect();
                    if names.is_empty() {
                        decl.embedded.push(fty);
                    } else {
                        decl.fields.extend(names.into_iter().map(|nm| (nm, fty.clone())));
                    }
                    continue;
                }
                let mut cursor = n.walk();
                stack.extend(n.named_children(&mut cursor));
            }
        } else if ty.kind() == "interface_type" {
            decl.kind = TypeDeclKind::Interface;
            let mut cursor = ty.walk();
            for child in ty.named_children(&mut cursor) {
                match child.kind() {
                    "method_elem" => {
                        if let Some(n) = child.child_by_field_name("name") {
                            decl.methods.push(self.text(n));
                        }
                    }
                    "type_elem" => {
                        let t = self.text(child);
                        if !t.contains(['|', '~']) {
                            decl.embedded.push(t);
                        }
                    }
                    _ => {}
                }
            }
        }
        self.facts.types.push(decl);
    }

    fn var_spec(&mut self, node: Node, scope: usize) {
        let ty = node.child_by_field_name("type").map(|t| self.text(t));
        let values = node.child_by_field_name("value").map(|v| self.expr_list(v)).unwrap_or_default();
        let mut cursor = node.walk();
        let names: Vec<String> = node.children_by_field_name("name", &mut cursor).map(|n| self.text(n)).collect();
        let single_call = values.len() == 1 && names.len() > 1;
        for (i, name) in names.into_iter().enumerate() {
            let value = match (&ty, values.get(i)) {
                (Some(t), _) => ValueExpr::Typed(t.clone()),
                (None, Some(v)) if !single_call || i == 0 => v.clone(),
                _ => ValueExpr::Unknown,
            };
            self.bind(scope, name, value);
        }
    }

    fn short_var(&mut self, node: Node, scope: usize) {
        let Some(left) = node.child_by_field_name("left") else { return };
        let range = node.kind() == "range_clause";
        let values = match (range, node.child_by_field_name("right")) {
            (false, Some(r)) => self.expr_list(r),
            _ => Vec::new(),
        };
        let mut cursor = left.walk();
        let names: Vec<String> = left.named_children(&mut cursor).map(|n| self.text(n)).collect();
        // `a, err := f()` binds the first result only.
        let single_call = values.len() == 1 && names.len() > 1;
        for (i, name) in names.into_iter().enumerate() {
            let value = match values.get(i) {
                Some(v) if !single_call || i == 0 => v.clone(),
                _ => ValueExpr::Unknown,
            };
            self.bind(scope, name, value);
        }
    }

    fn expr_list(&self, list: Node) -> Vec<ValueExpr> {
        let mut cursor = list.walk();
        let items: Vec<Node> = list.named_children(&mut cursor).collect();
        items.into_iter().map(|n| self.expr(n)).collect()
    }

    fn expr(&self, n: Node) -> ValueExpr {
        match n.kind() {
            "identifier" => ValueExpr::Ident(self.text(n)),
            "selector_expression" => match (n.child_by_field_name("operand"), n.child_by_field_name("field")) {
                (Some(o), Some(f)) => ValueExpr::Selector(Box::new(self.expr(o)), self.text(f)),
                _ => ValueExpr::Unknown,
            },
            "call_expression" => match n.child_by_field_name("function") {
                Some(f) => ValueExpr::Call(Box::new(self.expr(f))),
                None => ValueExpr::Unknown,
            },
            "composite_literal" => match n.child_by_field_name("type") {
                Some(t) => ValueExpr::Composite(self.text(t)),
                None => ValueExpr::Unknown,
            },
            "unary_expression" | "parenthesized_expression" => {
                let op = n.child_by_field_name("operator").map(|o| o.kind());
                if matches!(op, Some("&") | Some("*") | None) {
                    match n.child_by_field_name("operand").or_else(|| n.named_child(0)) {
                        Some(inner) => self.expr(inner),
                        None => ValueExpr::Unknown,
                    }
                } else {
                    ValueExpr::Unknown
                }
            }
            "type_assertion_expression" => match n.child_by_field_name("type") {
                Some(t) => ValueExpr::Typed(self.text(t)),
                None => ValueExpr::Unknown,
            },
            _ => ValueExpr::Unknown,
        }
    }

    fn receiver_call(&mut self, node: Node, scope: usize) {
        let Some(function) = node.child_by_field_name("function") else { return };
        if function.kind() != "selector_expression" {
            return;
        }
        let (Some(operand), Some(field)) = (function.child_by_field_name("operand"), function.child_by_field_name("field"))
        else {
            return;
        };
        let Some(&call_index) = self.call_index.get(&(node.start_byte(), node.end_byte())) else {
            return;
        };
        let receiver = self.expr(operand);
        let method = self.text(field);
        self.facts.receiver_calls.push(ReceiverCall {
            call_index,
            receiver,
            method,
            scope,
        });
    }
}
