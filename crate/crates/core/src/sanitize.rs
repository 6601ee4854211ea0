//! Input sanitization shared by the server, the CLI and subprocess callers.

use std::path::{Component, Path, PathBuf};

use crate::error::{Error, Result};

/// Characters that let an argument break out of a single command word:
/// separators, pipes, redirections, backticks, substitution and line breaks.
const SHELL_META: &[char] = &[';', '&', '|', '<', '>', '`', '$', '\n', '\r', '\0'];

/// Accepts plain words, paths and flags; rejects anything carrying shell
/// metacharacters or control characters.
pub fn validate_shell_arg(arg: &str) -> bool {
    !arg.chars().any(|c| SHELL_META.contains(&c) || c.is_control())
}

/// Lexically resolves `.` and `..` without touching the filesystem.
/// Returns `None` if the path climbs above its starting point.
fn normalize_relative(path: &Path) -> Option<PathBuf> {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    return None;
                }
            }
            Component::Normal(s) => out.push(s),
            Component::RootDir | Component::Prefix(_) => return None,
        }
    }
    Some(out)
}

/// Resolves `requested` (relative to `root`, or absolute) to a canonical
/// path, accepting it only when it stays inside the canonical root after
/// symlinks are followed.
pub fn validate_snippet_path(root: &Path, requested: &str) -> Result<PathBuf> {
    if requested.contains('\0') {
        return Err(Error::Containment);
    }
    let root = root.canonicalize().map_err(|_| Error::Containment)?;
    let requested = Path::new(requested);
    let candidate = if requested.is_absolute() {
        requested.to_path_buf()
    } else {
        root.join(normalize_relative(requested).ok_or(Error::Containment)?)
    };
    let canonical = match candidate.canonicalize() {
        Ok(p) => p,
        Err(_) if candidate.starts_with(&root) => {
            return Err(Error::NotFound {
                what: "file".into(),
                suggestions: Vec::new(),
            })
        }
        Err(_) => return Err(Error::Containment),
    };
    // Path::starts_with compares whole components, so "/repo-evil" is not
    // inside "/repo".
    if canonical.starts_with(&root) {
        Ok(canonical)
    } else {
        Err(Error::Containment)
    }
}

pub(crate) use validate_snippet_path as contained_path;
