//! Randomized edit scripts over a fixture repository.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Simple names defined somewhere in the corpus, used as call targets so
/// edits create and break real edges.
const TARGETS_PY: &[&str] = &["slugify", "to_cents", "make_product", "checkout", "apply_discount", "title_case"];
const TARGETS_GO: &[&str] = &["New", "Seeded", "Render", "LowStock", "GrandTotal", "normalizeSKU"];
const TARGETS_C: &[&str] = &["vec_new", "vec_push", "vec_sum", "sb_append", "fill"];

pub fn source_files(root: &Path) -> Vec<String> {
    let mut out: Vec<String> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?.to_string_lossy().replace('\\', "/");
            matches!(rel.rsplit('.').next(), Some("py" | "go" | "c" | "h")).then_some(rel)
        })
        .collect();
    out.sort();
    out
}

fn ext(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or("")
}

fn snippet(rng: &mut ChaCha8Rng, path: &str, n: usize) -> String {
    match ext(path) {
        "py" => {
            let t = TARGETS_PY.choose(rng).unwrap();
            format!("\n\ndef added_{n}(x):\n    return {t}(x)\n")
        }
        "go" => {
            let t = TARGETS_GO.choose(rng).unwrap();
            format!("\nfunc Added{n}() {{\n\t{t}()\n}}\n")
        }
        _ => {
            let t = TARGETS_C.choose(rng).unwrap();
            format!("\nvoid added_{n}(void)\n{{\n    {t}(0);\n}}\n")
        }
    }
}

fn fresh_file(rng: &mut ChaCha8Rng, n: usize) -> (String, String) {
    match rng.gen_range(0..3) {
        0 => {
            let dir = ["shop", "shop/extra", "tools", "shop/utils"].choose(rng).unwrap();
            let t = TARGETS_PY.choose(rng).unwrap();
            (
                format!("{dir}/new_{n}.py"),
                format!("from shop.services import *\n\n\ndef created_{n}(x):\n    return {t}(x)\n"),
            )
        }
        1 => {
            let (dir, pkg) = *[("inventory/store", "store"), ("inventory/extra", "extra")].choose(rng).unwrap();
            let t = TARGETS_GO.choose(rng).unwrap();
            (format!("{dir}/new_{n}.go"), format!("package {pkg}\n\nfunc Created{n}() {{\n\t{t}()\n}}\n"))
        }
        _ => {
            let t = TARGETS_C.choose(rng).unwrap();
            (format!("clib/new_{n}.c"), format!("#include \"vec.h\"\n\nint created_{n}(void)\n{{\n    return {t}(0);\n}}\n"))
        }
    }
}

/// Applies one random edit and returns the repository paths it touched.
pub fn random_edit(root: &Path, rng: &mut ChaCha8Rng, n: usize) -> (String, Vec<String>) {
    let files = source_files(root);
    let pick = files.choose(rng).cloned().unwrap_or_default();
    let abs = |rel: &str| -> PathBuf { root.join(rel) };
    let write = |rel: &str, text: &str| {
        let p = abs(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
    };
    match rng.gen_range(0..9) {
        0 | 1 if !pick.is_empty() => {
            let mut text = std::fs::read_to_string(abs(&pick)).unwrap_or_default();
            text += &snippet(rng, &pick, n);
            write(&pick, &text);
            ("append".into(), vec![pick])
        }
        2 if !pick.is_empty() => {
            std::fs::remove_file(abs(&pick)).unwrap();
            ("delete".into(), vec![pick])
        }
        3 => {
            let (rel, text) = fresh_file(rng, n);
            write(&rel, &text);
            ("create".into(), vec![rel])
        }
        4 if !pick.is_empty() => {
            let (dir, name) = pick.rsplit_once('/').unwrap_or(("", pick.as_str()));
            let target = if rng.gen_bool(0.5) || dir.is_empty() {
                format!("moved/{name}")
            } else {
                format!("{dir}/renamed_{n}_{name}")
            };
            let text = std::fs::read(abs(&pick)).unwrap();
            std::fs::remove_file(abs(&pick)).unwrap();
            std::fs::create_dir_all(abs(&target).parent().unwrap()).unwrap();
            std::fs::write(abs(&target), text).unwrap();
            ("rename".into(), vec![pick, target])
        }
        5 if !pick.is_empty() => {
            // Rename every definition of one name, breaking its callers.
            let text = std::fs::read_to_string(abs(&pick)).unwrap_or_default();
            let all: Vec<&str> = TARGETS_PY.iter().chain(TARGETS_GO).chain(TARGETS_C).copied().collect();
            let name = all.choose(rng).unwrap();
            write(&pick, &text.replace(name, &format!("{name}_v{n}")));
            ("rename_symbol".into(), vec![pick])
        }
        6 if !pick.is_empty() => {
            let mut text = std::fs::read_to_string(abs(&pick)).unwrap_or_default();
            text += "\n)))( def ][ func {{\n";
            write(&pick, &text);
            ("syntax_error".into(), vec![pick])
        }
        7 if !pick.is_empty() => {
            let text = std::fs::read(abs(&pick)).unwrap();
            std::fs::write(abs(&pick), text).unwrap();
            ("touch".into(), vec![pick])
        }
        _ => {
            let marker = ["shop/extra/__init__.py", "tools/__init__.py", "shop/utils/__init__.py"].choose(rng).unwrap();
            if abs(marker).exists() {
                std::fs::remove_file(abs(marker)).unwrap();
                ("remove_marker".into(), vec![marker.to_string()])
            } else {
                write(marker, "");
                ("add_marker".into(), vec![marker.to_string()])
            }
        }
    }
}
