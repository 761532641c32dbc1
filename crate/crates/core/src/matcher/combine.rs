//! Join consecutive segment paths of one thread.

use thiserror::Error;

use super::PathSegment;
use crate::graph::{AppModel, NodeId};
use crate::signature::ApiSignature;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombineError {
    #[error("segment {0} has no matched node")]
    EmptySegment(usize),
    #[error("no supergraph entry for callback {0}")]
    MissingEntry(ApiSignature),
}

/// A thread's segment paths plus the edges joining them.
#[derive(Debug, Clone, Default)]
pub struct Path {
    pub segments: Vec<PathSegment>,
    /// `(last matched node of segment i, entry of segment i + 1)`.
    pub joins: Vec<(NodeId, NodeId)>,
}

impl Path {
    /// All nodes in order, segment after segment.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.segments.iter().flat_map(|s| s.nodes.iter().copied())
    }
}

/// Link the last matched node of each segment to the entry of the next one.
pub fn combine(model: &AppModel, segments: Vec<PathSegment>) -> Result<Path, CombineError> {
    let mut joins = Vec::with_capacity(segments.len().saturating_sub(1));
    for (i, pair) in segments.windows(2).enumerate() {
        let from = pair[0].last_matched().ok_or(CombineError::EmptySegment(i))?;
        let to = model
            .supergraph_for(&pair[1].callback)
            .and_then(|g| g.entry())
            .ok_or_else(|| CombineError::MissingEntry(pair[1].callback.clone()))?;
        joins.push((from, to));
    }
    Ok(Path { segments, joins })
}
