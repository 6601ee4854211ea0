//! Python adapter.
//!
//! Module names follow the file path (`pkg/__init__.py` → `pkg`). Export
//! heuristic: no leading underscore, and every enclosing definition is
//! exported too. Routes come from Flask/FastAPI-style decorators.

use std::sync::OnceLock;

use regex::Regex;
use tree_sitter::Node;

use super::engine::{span_of, text};
use super::{dotted_module_path, AdapterSource, DefKind, FileExtraction, Hooks, ImportEntry, RawDefinition, RawRoute};

const DEFINITIONS: &str = r#"
(function_definition
  name: (identifier) @name
  parameters: (parameters) @params
  return_type: (_)? @return
  body: (block) @body) @def.function
(class_definition
  name: (identifier) @name
  body: (block) @body) @def.class
"#;

const CALLS: &str = r#"
(call function: (_) @callee) @call
"#;

const USAGES: &str = r#"
(class_definition superclasses: (argument_list (identifier) @usage.inherits))
(class_definition superclasses: (argument_list (attribute) @usage.inherits))
(decorator (identifier) @usage.decorates)
(decorator (attribute) @usage.decorates)
(decorator (call function: (_) @usage.decorates))
(typed_parameter type: (type) @usage.type)
(typed_default_parameter type: (type) @usage.type)
(function_definition return_type: (type) @usage.type)
(call arguments: (argument_list (identifier) @usage.reference))
(keyword_argument value: (identifier) @usage.reference)
"#;

pub(super) fn source() -> AdapterSource {
    AdapterSource {
        language_id: "python",
        file_extensions: &["py", "pyi"],
        grammar: || tree_sitter_python::LANGUAGE.into(),
        definitions: DEFINITIONS,
        calls: CALLS,
        usages: USAGES,
        branch_kinds: &[
            "if_statement",
            "elif_clause",
            "for_statement",
            "while_statement",
            "except_clause",
            "conditional_expression",
            "boolean_operator",
            "for_in_clause",
            "if_clause",
            "case_clause",
        ],
        logical_ops: &[],
        type_name_kinds: &["identifier", "attribute"],
        hooks: Hooks {
            module_qname,
            imports,
            refine,
            is_exported,
        },
    }
}

fn module_qname(path: &str, _root: Node, _src: &[u8]) -> String {
    let dotted = dotted_module_path(path);
    if let Some(pkg) = dotted.strip_suffix("__init__") {
        let pkg = pkg.trim_end_matches('.');
        if !pkg.is_empty() {
            return pkg.to_string();
        }
    }
    dotted
}

/// Package that relative imports resolve against.
fn package_of(path: &str, module: &str) -> String {
    if path.ends_with("__init__.py") {
        module.to_string()
    } else {
        module.rsplit_once('.').map(|(p, _)| p.to_string()).unwrap_or_default()
    }
}

fn resolve_relative(prefix_dots: usize, rest: &str, path: &str, module: &str) -> String {
    let mut base = package_of(path, module);
    for _ in 1..prefix_dots {
        base = base.rsplit_once('.').map(|(p, _)| p.to_string()).unwrap_or_default();
    }
    match (base.is_empty(), rest.is_empty()) {
        (true, _) => rest.to_string(),
        (false, true) => base,
        (false, false) => format!("{base}.{rest}"),
    }
}

fn imports(root: Node, src: &[u8], path: &str, module: &str) -> Vec<ImportEntry> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        match n.kind() {
            "import_statement" => {
                let mut cursor = n.walk();
                for name in n.children_by_field_name("name", &mut cursor) {
                    let (target, alias) = match name.kind() {
                        "aliased_import" => (
                            name.child_by_field_name("name").map(|x| text(x, src).into_owned()),
                            name.child_by_field_name("alias").map(|x| text(x, src).into_owned()),
                        ),
                        _ => (Some(text(name, src).into_owned()), None),
                    };
                    let Some(target) = target else { continue };
                    out.push(ImportEntry {
                        local_alias: alias.unwrap_or_else(|| target.clone()),
                        target_module_qname: target.clone(),
                        raw: target,
                        span: span_of(n),
                        wildcard: false,
                    });
                }
            }
            "import_from_statement" => {
                let Some(module_node) = n.child_by_field_name("module_name") else { continue };
                let base = if module_node.kind() == "relative_import" {
                    let raw = text(module_node, src);
                    let dots = raw.chars().take_while(|c| *c == '.').count();
                    resolve_relative(dots, raw.trim_start_matches('.'), path, module)
                } else {
                    text(module_node, src).into_owned()
                };
                let raw = text(module_node, src).into_owned();
                let mut cursor = n.walk();
                let mut any_named = false;
                for name in n.children_by_field_name("name", &mut cursor) {
                    any_named = true;
                    let (sym, alias) = match name.kind() {
                        "aliased_import" => (
                            name.child_by_field_name("name").map(|x| text(x, src).into_owned()),
                            name.child_by_field_name("alias").map(|x| text(x, src).into_owned()),
                        ),
                        _ => (Some(text(name, src).into_owned()), None),
                    };
                    let Some(sym) = sym else { continue };
                    let target = if base.is_empty() { sym.clone() } else { format!("{base}.{sym}") };
                    out.push(ImportEntry {
                        local_alias: alias.unwrap_or(sym),
                        target_module_qname: target,
                        raw: raw.clone(),
                        span: span_of(n),
                        wildcard: false,
                    });
                }
                let mut c2 = n.walk();
                let has_wildcard = n.children(&mut c2).any(|c| c.kind() == "wildcard_import");
                if has_wildcard || !any_named {
                    out.push(ImportEntry {
                        local_alias: "*".to_string(),
                        target_module_qname: base,
                        raw,
                        span: span_of(n),
                        wildcard: true,
                    });
                }
            }
            _ => {
                let mut cursor = n.walk();
                let children: Vec<Node> = n.named_children(&mut cursor).collect();
                stack.extend(children.into_iter().rev());
            }
        }
    }
    out.sort_by_key(|i| i.span.start_line);
    out
}

const ENUM_BASES: &[&str] = &["Enum", "IntEnum", "StrEnum", "Flag", "IntFlag"];

fn refine(ext: &mut FileExtraction, _root: Node, src: &[u8], def_nodes: &[Node]) {
    #[allow(clippy::needless_range_loop)]
    for i in 0..ext.definitions.len() {
        let node = def_nodes[i];
        let parent_kind = ext.definitions[i].parent.map(|p| ext.definitions[p].kind);
        let def = &mut ext.definitions[i];
        if def.kind == DefKind::Function
            && matches!(parent_kind, Some(DefKind::Class | DefKind::Enum | DefKind::Interface))
        {
            def.kind = DefKind::Method;
        }
        if def.kind == DefKind::Class {
            if let Some(bases) = node.child_by_field_name("superclasses") {
                let mut cursor = bases.walk();
                let is_enum = bases.named_children(&mut cursor).any(|b| {
                    let t = text(b, src);
                    ENUM_BASES.contains(&t.rsplit('.').next().unwrap_or(&t))
                });
                if is_enum {
                    def.kind = DefKind::Enum;
                }
            }
        }
        if let Some(decorated) = node.parent().filter(|p| p.kind() == "decorated_definition") {
            let mut cursor = decorated.walk();
            for dec in decorated.named_children(&mut cursor).filter(|c| c.kind() == "decorator") {
                let Some(expr) = dec.named_child(0) else { continue };
                let name_node = if expr.kind() == "call" {
                    expr.child_by_field_name("function").unwrap_or(expr)
                } else {
                    expr
                };
                let name: String = text(name_node, src).chars().filter(|c| !c.is_whitespace()).collect();
                if let Some(route) = route_from_decorator(&name, expr, src, i) {
                    ext.routes.extend(route);
                }
                ext.definitions[i].decorators.push(name);
            }
        }
    }
}

/// `@app.route("/p", methods=[...])`, `@router.get("/p")` and friends.
fn route_from_decorator(name: &str, expr: Node, src: &[u8], handler: usize) -> Option<Vec<RawRoute>> {
    static VERB: OnceLock<Regex> = OnceLock::new();
    let verb = VERB.get_or_init(|| {
        Regex::new(r"^[A-Za-z_][\w.]*\.(route|get|post|put|delete|patch)$").unwrap()
    });
    let caps = verb.captures(name)?;
    if expr.kind() != "call" {
        return None;
    }
    let args = expr.child_by_field_name("arguments")?;
    let mut cursor = args.walk();
    let children: Vec<Node> = args.named_children(&mut cursor).collect();
    let path = children
        .iter()
        .find(|c| c.kind() == "string")
        .map(|s| string_value(*s, src))?;
    let methods: Vec<String> = match &caps[1] {
        "route" => {
            let listed: Vec<String> = children
                .iter()
                .filter(|c| c.kind() == "keyword_argument")
                .filter(|k| k.child_by_field_name("name").is_some_and(|n| text(n, src) == "methods"))
                .filter_map(|k| k.child_by_field_name("value"))
                .flat_map(|list| {
                    let mut c = list.walk();
                    list.named_children(&mut c)
                        .filter(|x| x.kind() == "string")
                        .map(|x| string_value(x, src).to_uppercase())
                        .collect::<Vec<_>>()
                })
                .collect();
            if listed.is_empty() {
                vec!["GET".to_string()]
            } else {
                listed
            }
        }
        verb => vec![verb.to_uppercase()],
    };
    Some(
        methods
            .into_iter()
            .map(|method| RawRoute {
                method,
                path: path.clone(),
                handler,
                span: span_of(expr),
            })
            .collect(),
    )
}

fn string_value(node: Node, src: &[u8]) -> String {
    let mut cursor = node.walk();
    let content: String = node
        .named_children(&mut cursor)
        .filter(|c| c.kind() == "string_content")
        .map(|c| text(c, src).into_owned())
        .collect();
    content
}

fn is_exported(def: &RawDefinition, parent: Option<&RawDefinition>, _node: Node, _src: &[u8]) -> bool {
    let parent_ok = match parent {
        None => true,
        Some(p) => p.is_exported && matches!(p.kind, DefKind::Class | DefKind::Enum | DefKind::Interface),
    };
    parent_ok && !def.simple_name.starts_with('_')
}
