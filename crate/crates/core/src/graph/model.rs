use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Node and edge property bag. Ordered so serialized output is stable.
pub type Properties = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeLabel {
    Project,
    Package,
    Folder,
    File,
    Module,
    Function,
    Method,
    Class,
    Interface,
    Enum,
    Type,
    Route,
    Community,
}

impl NodeLabel {
    pub const ALL: [NodeLabel; 13] = [
        NodeLabel::Project,
        NodeLabel::Package,
        NodeLabel::Folder,
        NodeLabel::File,
        NodeLabel::Module,
        NodeLabel::Function,
        NodeLabel::Method,
        NodeLabel::Class,
        NodeLabel::Interface,
        NodeLabel::Enum,
        NodeLabel::Type,
        NodeLabel::Route,
        NodeLabel::Community,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeLabel::Project => "Project",
            NodeLabel::Package => "Package",
            NodeLabel::Folder => "Folder",
            NodeLabel::File => "File",
            NodeLabel::Module => "Module",
            NodeLabel::Function => "Function",
            NodeLabel::Method => "Method",
            NodeLabel::Class => "Class",
            NodeLabel::Interface => "Interface",
            NodeLabel::Enum => "Enum",
            NodeLabel::Type => "Type",
            NodeLabel::Route => "Route",
            NodeLabel::Community => "Community",
        }
    }

    /// Function-like definitions that participate in call resolution.
    pub fn is_callable(self) -> bool {
        matches!(self, NodeLabel::Function | NodeLabel::Method)
    }

    /// Type-like definitions that participate in type-usage resolution.
    pub fn is_type_like(self) -> bool {
        matches!(
            self,
            NodeLabel::Class | NodeLabel::Interface | NodeLabel::Enum | NodeLabel::Type
        )
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown node label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    Calls,
    HttpCalls,
    AsyncCalls,
    Imports,
    ContainsFile,
    ContainsFolder,
    ContainsPackage,
    Defines,
    DefinesMethod,
    Implements,
    Handles,
    Inherits,
    Decorates,
    UsesType,
    Usage,
    Tests,
    FileChangesWith,
    MemberOf,
}

impl EdgeType {
    pub const ALL: [EdgeType; 18] = [
        EdgeType::Calls,
        EdgeType::HttpCalls,
        EdgeType::AsyncCalls,
        EdgeType::Imports,
        EdgeType::ContainsFile,
        EdgeType::ContainsFolder,
        EdgeType::ContainsPackage,
        EdgeType::Defines,
        EdgeType::DefinesMethod,
        EdgeType::Implements,
        EdgeType::Handles,
        EdgeType::Inherits,
        EdgeType::Decorates,
        EdgeType::UsesType,
        EdgeType::Usage,
        EdgeType::Tests,
        EdgeType::FileChangesWith,
        EdgeType::MemberOf,
    ];

    /// Edge types that make up the call graph.
    pub const CALL_FAMILY: [EdgeType; 3] =
        [EdgeType::Calls, EdgeType::HttpCalls, EdgeType::AsyncCalls];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Calls => "CALLS",
            EdgeType::HttpCalls => "HTTP_CALLS",
            EdgeType::AsyncCalls => "ASYNC_CALLS",
            EdgeType::Imports => "IMPORTS",
            EdgeType::ContainsFile => "CONTAINS_FILE",
            EdgeType::ContainsFolder => "CONTAINS_FOLDER",
            EdgeType::ContainsPackage => "CONTAINS_PACKAGE",
            EdgeType::Defines => "DEFINES",
            EdgeType::DefinesMethod => "DEFINES_METHOD",
            EdgeType::Implements => "IMPLEMENTS",
            EdgeType::Handles => "HANDLES",
            EdgeType::Inherits => "INHERITS",
            EdgeType::Decorates => "DECORATES",
            EdgeType::UsesType => "USES_TYPE",
            EdgeType::Usage => "USAGE",
            EdgeType::Tests => "TESTS",
            EdgeType::FileChangesWith => "FILE_CHANGES_WITH",
            EdgeType::MemberOf => "MEMBER_OF",
        }
    }

    pub fn is_call(self) -> bool {
        Self::CALL_FAMILY.contains(&self)
    }

    /// Structural edges always carry confidence 1.0.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            EdgeType::ContainsFile
                | EdgeType::ContainsFolder
                | EdgeType::ContainsPackage
                | EdgeType::Defines
                | EdgeType::DefinesMethod
                | EdgeType::MemberOf
        )
    }

    /// Containment edge type for a child of the given label.
    pub fn contains(child: NodeLabel) -> Option<EdgeType> {
        match child {
            NodeLabel::File => Some(EdgeType::ContainsFile),
            NodeLabel::Folder => Some(EdgeType::ContainsFolder),
            NodeLabel::Package => Some(EdgeType::ContainsPackage),
            _ => None,
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown edge type {s:?}")))
    }
}

/// 1-based inclusive line range. `(0, 0)` for nodes without a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn new(start_line: u32, end_line: u32) -> Self {
        Span {
            start_line,
            end_line,
        }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }
}

/// Identity of a node independent of any persisted id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub label: NodeLabel,
    pub qualified_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: NodeLabel,
    pub qualified_name: String,
    pub simple_name: String,
    pub file_path: String,
    pub span: Span,
    pub properties: Properties,
}

impl GraphNode {
    pub fn new(label: NodeLabel, qualified_name: impl Into<String>) -> Self {
        let qualified_name = qualified_name.into();
        let simple_name = simple_name_of(&qualified_name).to_string();
        GraphNode {
            label,
            qualified_name,
            simple_name,
            file_path: String::new(),
            span: Span::default(),
            properties: Properties::new(),
        }
    }

    pub fn with_file(mut self, file_path: impl Into<String>, span: Span) -> Self {
        self.file_path = file_path.into();
        self.span = span;
        self
    }

    pub fn with_simple_name(mut self, simple_name: impl Into<String>) -> Self {
        self.simple_name = simple_name.into();
        self
    }

    pub fn key(&self) -> NodeKey {
        NodeKey {
            label: self.label,
            qualified_name: self.qualified_name.clone(),
        }
    }
}

/// Last dotted segment of a qualified name.
pub fn simple_name_of(qualified_name: &str) -> &str {
    qualified_name
        .rsplit_once('.')
        .map(|(_, s)| s)
        .unwrap_or(qualified_name)
}

/// A persisted edge, endpoints given as store ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: i64,
    pub src: i64,
    pub dst: i64,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    pub confidence: f64,
    pub properties: Properties,
}
