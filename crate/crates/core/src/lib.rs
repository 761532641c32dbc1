//! Reconstruct the execution path of an app through its control-flow
//! supergraphs from API-level audit log records, using the recorded call
//! stack to prune the search.

pub mod graph;
pub mod log;
pub mod matcher;
pub mod signature;
pub mod sim;

pub use graph::{AppModel, GraphOverlay, Node, NodeId, Supergraph};
pub use log::{LogRecord, LogSegment, LogSequence};
pub use signature::{ApiSignature, MethodId};
