use super::*;

fn py() -> &'static LanguageAdapter {
    adapter("python").unwrap()
}
fn go() -> &'static LanguageAdapter {
    adapter("go").unwrap()
}
fn c() -> &'static LanguageAdapter {
    adapter("c").unwrap()
}

#[test]
fn detect_by_extension() {
    assert_eq!(detect_language("src/a.py"), Some("python"));
    assert_eq!(detect_language("cmd/main.go"), Some("go"));
    assert_eq!(detect_language("lib/x.h"), Some("c"));
    assert_eq!(detect_language("README.md"), None);
    assert_eq!(detect_language("Makefile"), None);
}

#[test]
fn extensions_map_to_one_adapter() {
    let mut seen = std::collections::HashSet::new();
    for a in adapters() {
        for ext in a.file_extensions {
            assert!(seen.insert(*ext), "{ext} claimed twice");
        }
    }
}

#[test]
fn language_filter() {
    let f = LanguageFilter(Some(vec!["go".into()]));
    assert_eq!(f.detect("a.go"), Some("go"));
    assert_eq!(f.detect("a.py"), None);
    assert_eq!(LanguageFilter(None).detect("a.py"), Some("python"));
}

#[test]
fn empty_file_has_no_definitions() {
    for a in adapters() {
        assert!(extract_definitions(b"", a).is_empty());
    }
}

#[test]
fn class_with_two_methods() {
    let src = b"class Repo:\n    def load(self):\n        pass\n\n    def save(self):\n        pass\n";
    let defs = extract_definitions(src, py());
    assert_eq!(defs.len(), 3);
    assert_eq!(defs[0].kind, DefKind::Class);
    for m in &defs[1..] {
        assert_eq!(m.kind, DefKind::Method);
        assert_eq!(m.container_chain, vec!["Repo".to_string()]);
    }
}

#[test]
fn trailing_garbage_keeps_first_function() {
    let src = b"def first():\n    return 1\n\ndef (((:\n  ]]] class\n";
    let defs = extract_definitions(src, py());
    assert!(defs.iter().any(|d| d.simple_name == "first"));
}

#[test]
fn minimal_call() {
    let calls = extract_call_sites(b"def f():\n    g()\n", py());
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].callee_text, "g");
    assert_eq!(calls[0].enclosing_definition, Some(0));
}

#[test]
fn dotted_callee_is_preserved() {
    let calls = extract_call_sites(b"package m\nfunc f() { pkg.Func(x) }\n", go());
    assert_eq!(calls[0].callee_text, "pkg.Func");
    assert!(calls[0].is_method_call);
    assert_eq!(calls[0].receiver_text, "pkg");
}

#[test]
fn nested_calls_in_source_order() {
    let calls = extract_call_sites(b"def outer():\n    f(g(h()))\n", py());
    let names: Vec<&str> = calls.iter().map(|c| c.callee_text.as_str()).collect();
    assert_eq!(names, ["f", "g", "h"]);
}

#[test]
fn python_imports() {
    let src = b"import numpy.linalg as np\nfrom a.b import c as d, e\nfrom x import *\nimport np\n";
    let imports = extract_imports(src, py());
    let pairs: Vec<(&str, &str, bool)> = imports
        .iter()
        .map(|i| (i.local_alias.as_str(), i.target_module_qname.as_str(), i.wildcard))
        .collect();
    assert_eq!(
        pairs,
        [
            ("np", "numpy.linalg", false),
            ("d", "a.b.c", false),
            ("e", "a.b.e", false),
            ("*", "x", true),
            ("np", "np", false),
        ]
    );
}

#[test]
fn relative_imports_resolve_against_package() {
    let src = b"from . import sib\nfrom ..up import thing\n";
    let ext = extract_file("pkg/sub/mod.py", src, py());
    let targets: Vec<&str> = ext.imports.iter().map(|i| i.target_module_qname.as_str()).collect();
    assert_eq!(targets, ["pkg.sub.sib", "pkg.up.thing"]);
}

#[test]
fn no_imports() {
    for a in adapters() {
        assert!(extract_imports(b"", a).is_empty());
    }
}

#[test]
fn go_imports_with_alias_dot_and_blank() {
    let src = b"package m\nimport (\n  u \"example.com/svc/user\"\n  . \"strings\"\n  _ \"embed\"\n  \"fmt\"\n)\n";
    let imports = extract_imports(src, go());
    let pairs: Vec<(&str, &str, bool)> = imports
        .iter()
        .map(|i| (i.local_alias.as_str(), i.target_module_qname.as_str(), i.wildcard))
        .collect();
    assert_eq!(
        pairs,
        [
            ("u", "example_com.svc.user", false),
            ("*", "strings", true),
            ("_", "embed", false),
            ("fmt", "fmt", false),
        ]
    );
}

#[test]
fn c_includes_are_wildcards_relative_to_file() {
    let src = b"#include \"../util/str.h\"\n#include <stdio.h>\n";
    let ext = extract_file("src/core/main.c", src, c());
    let targets: Vec<(&str, bool)> = ext
        .imports
        .iter()
        .map(|i| (i.target_module_qname.as_str(), i.wildcard))
        .collect();
    assert_eq!(targets, [("src.util.str", true), ("stdio", true)]);
}

#[test]
fn usages_inheritance_and_decorators() {
    let u = extract_usages(b"class A(Base):\n    pass\n", py());
    assert_eq!(u.len(), 1);
    assert_eq!((u[0].kind, u[0].symbol_text.as_str()), (UsageKind::Inherits, "Base"));

    let u = extract_usages(b"@cached\ndef f():\n    pass\n", py());
    assert_eq!(u.len(), 1);
    assert_eq!((u[0].kind, u[0].symbol_text.as_str()), (UsageKind::Decorates, "cached"));

    assert!(extract_usages(b"def f():\n    pass\n", py()).is_empty());
}

#[test]
fn python_module_names() {
    assert_eq!(extract_file("pkg/__init__.py", b"", py()).module_qname, "pkg");
    assert_eq!(extract_file("pkg/a/b.py", b"x = 1\n", py()).module_qname, "pkg.a.b");
}

#[test]
fn python_export_and_enum_and_route() {
    let src = b"from enum import Enum\nclass Color(Enum):\n    RED = 1\n\nclass _Hidden:\n    def shown(self):\n        pass\n\n@app.route(\"/users\", methods=[\"GET\", \"POST\"])\ndef users():\n    pass\n";
    let ext = extract_file("app.py", src, py());
    let by_name = |n: &str| ext.definitions.iter().find(|d| d.simple_name == n).unwrap();
    assert_eq!(by_name("Color").kind, DefKind::Enum);
    assert!(!by_name("_Hidden").is_exported);
    assert!(!by_name("shown").is_exported);
    assert!(by_name("users").is_exported);
    assert_eq!(by_name("users").decorators, vec!["app.route".to_string()]);
    let routes: Vec<(&str, &str)> = ext.routes.iter().map(|r| (r.method.as_str(), r.path.as_str())).collect();
    assert_eq!(routes, [("GET", "/users"), ("POST", "/users")]);
}

#[test]
fn go_methods_use_receiver_as_container() {
    let src = b"package svc\ntype Store struct{ n int }\nfunc (s *Store) Save() error { return nil }\nfunc helper() {}\ntype Saver interface { Save() error }\n";
    let ext = extract_file("svc/store.go", src, go());
    assert_eq!(ext.module_qname, "svc");
    let save = ext.definitions.iter().position(|d| d.simple_name == "Save").unwrap();
    assert_eq!(ext.definitions[save].kind, DefKind::Method);
    assert_eq!(ext.definitions[save].receiver, "*Store");
    assert_eq!(ext.qualified_name(save), "svc.Store.Save");
    assert!(ext.definitions[save].is_exported);
    let helper = ext.definitions.iter().find(|d| d.simple_name == "helper").unwrap();
    assert!(!helper.is_exported);
    let kinds = count_by_kind(&ext.definitions);
    assert_eq!(kinds[&DefKind::Class], 1);
    assert_eq!(kinds[&DefKind::Interface], 1);
}

#[test]
fn go_init_functions_are_disambiguated() {
    let ext = extract_file("p/a.go", b"package p\nfunc init() {}\n", go());
    assert_eq!(ext.qualified_name(0), "p.init@a_go");
}

#[test]
fn go_async_calls() {
    let calls = extract_call_sites(b"package m\nfunc f() { go worker(); other() }\n", go());
    let flags: Vec<(&str, bool)> = calls.iter().map(|c| (c.callee_text.as_str(), c.is_async)).collect();
    assert_eq!(flags, [("worker", true), ("other", false)]);
}

#[test]
fn c_definitions() {
    let src = b"typedef struct { int a; } P;\nstruct Q { int b; };\nenum E { A };\ntypedef unsigned long ul;\nstatic char **dup(const char *s) { return 0; }\nint main(void) { return dup(0) != 0; }\n";
    let ext = extract_file("x.c", src, c());
    let got: Vec<(&str, DefKind, bool)> = ext
        .definitions
        .iter()
        .map(|d| (d.simple_name.as_str(), d.kind, d.is_exported))
        .collect();
    assert_eq!(
        got,
        [
            ("P", DefKind::Class, true),
            ("Q", DefKind::Class, true),
            ("E", DefKind::Enum, true),
            ("ul", DefKind::Type, true),
            ("dup", DefKind::Function, false),
            ("main", DefKind::Function, true),
        ]
    );
    assert_eq!(ext.calls.len(), 1);
    assert_eq!(ext.calls[0].callee_text, "dup");
}

#[test]
fn complexity_counts_branches() {
    let src = b"def f(x):\n    if x and y:\n        return 1\n    for i in x:\n        pass\n    return 0\n\ndef g():\n    pass\n";
    let defs = extract_definitions(src, py());
    assert_eq!(defs[0].complexity, 4);
    assert_eq!(defs[1].complexity, 1);
    let go_src = b"package m\nfunc f(a, b bool) int { if a && b || a { return 1 }; return 0 }\n";
    assert_eq!(extract_definitions(go_src, go())[0].complexity, 4);
}

#[test]
fn spans_nest_inside_enclosing_definition() {
    let src = b"class A:\n    def m(self, x: int) -> str:\n        g(h(x))\n        return str(x)\n";
    let ext = extract_file("a.py", src, py());
    for c in &ext.calls {
        let d = &ext.definitions[c.enclosing_definition.unwrap()];
        assert!(d.span.contains(&c.span));
    }
    for u in &ext.usages {
        if let Some(i) = u.enclosing_definition {
            assert!(ext.definitions[i].span.contains(&u.span));
        }
    }
}

#[test]
fn generic_fallback_extracts_modules() {
    let found = generic_imports("use foo::bar;\nconst x = require('lib/y');\n", "m");
    let targets: Vec<&str> = found.iter().map(|i| i.target_module_qname.as_str()).collect();
    assert_eq!(targets, ["foo.bar", "lib.y"]);
}

#[test]
fn go_type_facts_capture_receivers() {
    use crate::resolve::types::ValueExpr;
    let src = b"package m\nfunc f() {\n  var s T\n  s.m()\n  NewT().g()\n}\n";
    let ext = extract_file("m/a.go", src, go());
    let facts = ext.type_facts.as_ref().unwrap();
    assert_eq!(facts.receiver_calls.len(), 2);
    assert_eq!(facts.receiver_calls[0].receiver, ValueExpr::Ident("s".into()));
    assert_eq!(
        facts.receiver_calls[1].receiver,
        ValueExpr::Call(Box::new(ValueExpr::Ident("NewT".into())))
    );
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn extraction_never_panics_and_is_deterministic(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
            for a in adapters() {
                let one = extract_file("f.x", &bytes, a);
                let two = extract_file("f.x", &bytes, a);
                prop_assert_eq!(one, two);
            }
        }

        #[test]
        fn python_like_text_is_deterministic(src in "(def [a-c]\\(\\):\n    [a-c]\\(\\)\n|class [A-C]:\n    pass\n|x = [a-c]\\.[a-c]\\(\\)\n){0,8}") {
            let a = extract_file("m.py", src.as_bytes(), py());
            let b = extract_file("m.py", src.as_bytes(), py());
            prop_assert_eq!(&a, &b);
            for c in &a.calls {
                if let Some(i) = c.enclosing_definition {
                    prop_assert!(a.definitions[i].span.contains(&c.span));
                }
            }
        }
    }
}
