//! Typed property-graph schema and the in-memory staging buffer.

mod buffer;
mod model;

pub use buffer::{buffer_merge, BufferEdge, GraphBuffer, TempId};
pub use model::{EdgeType, GraphEdge, GraphNode, NodeKey, NodeLabel, Properties, Span};
