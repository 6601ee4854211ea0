use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::graph::{EdgeType, GraphBuffer, GraphNode, NodeLabel, Span, TempId};

/// File names whose presence turns a directory into a Package.
pub const PACKAGE_MARKERS: &[&str] = &[
    "__init__.py",
    "go.mod",
    "setup.py",
    "pyproject.toml",
    "Cargo.toml",
    "package.json",
];

pub fn project_qname(project: &str) -> String {
    format!("project:{project}")
}

pub fn dir_qname(path: &str) -> String {
    format!("dir:{path}")
}

pub fn file_qname(path: &str) -> String {
    format!("file:{path}")
}

fn last_segment(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

fn parent_dir(path: &str) -> Option<&str> {
    path.rsplit_once('/').map(|(p, _)| p)
}

/// Directories on the path from the root to any of `files`, sorted.
pub fn directories_of<'a>(files: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    let mut dirs = BTreeSet::new();
    for f in files {
        let mut cur = parent_dir(f);
        while let Some(d) = cur {
            if !dirs.insert(d.to_string()) {
                break;
            }
            cur = parent_dir(d);
        }
    }
    dirs
}

pub fn file_node(path: &str, language: &str, module: &str) -> GraphNode {
    let mut n = GraphNode::new(NodeLabel::File, file_qname(path))
        .with_simple_name(last_segment(path))
        .with_file(path, Span::default());
    n.properties.insert("language".into(), language.to_string());
    if !module.is_empty() {
        n.properties.insert("module".into(), module.to_string());
    }
    n
}

/// One indexed file as seen by the structure phase.
pub struct StructureFile<'a> {
    pub path: &'a str,
    pub language: &'a str,
    pub module: &'a str,
}

/// Project, Folder/Package and File nodes with the containment tree rooted
/// at the Project. Only directories leading to an indexed file appear.
pub fn phase_structure(project: &str, marker_dirs: &BTreeSet<String>, files: &[StructureFile<'_>]) -> Result<GraphBuffer> {
    let mut b = GraphBuffer::new();
    let root = b.add_node(GraphNode::new(NodeLabel::Project, project_qname(project)).with_simple_name(project))?;
    let mut ids: BTreeMap<String, TempId> = BTreeMap::new();
    let parent_of = |path: &str, ids: &BTreeMap<String, TempId>| parent_dir(path).and_then(|p| ids.get(p).copied()).unwrap_or(root);
    for dir in directories_of(files.iter().map(|f| f.path)) {
        let label = if marker_dirs.contains(&dir) { NodeLabel::Package } else { NodeLabel::Folder };
        let node = GraphNode::new(label, dir_qname(&dir))
            .with_simple_name(last_segment(&dir))
            .with_file(dir.as_str(), Span::default());
        let id = b.add_node(node)?;
        let parent = parent_of(&dir, &ids);
        b.add_edge(parent, id, EdgeType::contains(label).unwrap_or(EdgeType::ContainsFolder), 1.0)?;
        ids.insert(dir, id);
    }
    for f in files {
        let id = b.add_node(file_node(f.path, f.language, f.module))?;
        b.add_edge(parent_of(f.path, &ids), id, EdgeType::ContainsFile, 1.0)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(path: &str) -> StructureFile<'_> {
        StructureFile {
            path,
            language: "python",
            module: "",
        }
    }

    #[test]
    fn single_root_file() {
        let b = phase_structure("p", &BTreeSet::new(), &[sf("a.py")]).unwrap();
        assert_eq!(b.node_count(), 2);
        assert_eq!(b.edge_count(), 1);
        assert_eq!(b.edges()[0].edge_type, EdgeType::ContainsFile);
    }

    #[test]
    fn nested_chain_and_packages() {
        let markers = BTreeSet::from(["a/b".to_string()]);
        let b = phase_structure("p", &markers, &[sf("a/b/c.py")]).unwrap();
        let chain: Vec<(String, EdgeType, String)> = b
            .edges()
            .iter()
            .map(|e| (b.node(e.src).qualified_name.clone(), e.edge_type, b.node(e.dst).qualified_name.clone()))
            .collect();
        assert_eq!(
            chain,
            vec![
                ("project:p".into(), EdgeType::ContainsFolder, "dir:a".into()),
                ("dir:a".into(), EdgeType::ContainsPackage, "dir:a/b".into()),
                ("dir:a/b".into(), EdgeType::ContainsFile, "file:a/b/c.py".into()),
            ]
        );
    }
}
