//! Stack-guided log matching over supergraphs, the pure backtracking
//! baseline, successor updates for reflection and ICC, and segment
//! combination.

mod check;
mod combine;
mod dot;
mod pipeline;
mod search;
mod silent;
mod update;
pub mod verify;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphOverlay, LookupError, NodeId};
use crate::signature::{ApiSignature, MethodId};

pub use check::{is_matched, node_checking, Decision};
pub use combine::{combine, CombineError, Path};
pub use dot::to_dot;
pub use pipeline::{match_all, MatchReport, OverlayNode, SegmentReport, SegmentStatus, ThreadReport};
pub use search::{exhaustive_visit_bound, match_segment, match_segment_backtracking};
pub use silent::SilentMethods;
pub use update::{synthetic_id, update_successors};
pub use verify::{verify_walk, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Call-stack guided search.
    #[default]
    Guided,
    /// Signature-only depth-first search.
    Backtracking,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Guided => "guided",
            Strategy::Backtracking => "backtracking",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MatchConfig {
    pub strategy: Strategy,
    /// Stop after this many satisfying paths. 1 disables the ambiguity
    /// probe, 2 is the default probe, larger values enumerate alternatives.
    pub max_paths: usize,
    /// Visits allowed in the unguided forward mode per record.
    pub max_unguided_per_record: u64,
    /// Hard cap on node visits per segment.
    pub max_visits: u64,
    /// Deepest emulated stack the search will build.
    pub max_depth: usize,
    /// Memoize fully explored search states.
    pub memoize: bool,
    /// Process to scope the log to; inferred from the first callback record when unset.
    pub pid: Option<u32>,
    /// Library prefixes overriding the model's list.
    pub prefixes: Option<Vec<String>>,
    /// Worker threads for segment matching; 0 picks the hardware parallelism.
    pub jobs: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Guided,
            max_paths: 2,
            max_unguided_per_record: 100_000,
            max_visits: 20_000_000,
            max_depth: 256,
            memoize: true,
            pid: None,
            prefixes: None,
            jobs: 0,
        }
    }
}

impl MatchConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }
}

/// The emulated app-level call stack, bottom (callback) first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmuStack {
    pub frames: Vec<MethodId>,
}

impl EmuStack {
    pub fn new(callback: MethodId) -> Self {
        Self {
            frames: vec![callback],
        }
    }

    pub fn push(&mut self, m: MethodId) {
        self.frames.push(m);
    }

    pub fn pop(&mut self) -> Option<MethodId> {
        self.frames.pop()
    }

    pub fn top(&self) -> Option<&MethodId> {
        self.frames.last()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoMatchReason {
    Exhausted,
    UnguidedBudget,
    VisitBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("segment callback {found} does not root supergraph {expected}")]
    CallbackMismatch {
        expected: ApiSignature,
        found: ApiSignature,
    },
    #[error("no supergraph for callback {0}")]
    MissingSupergraph(ApiSignature),
    #[error("no matching path ({reason:?}); deepest matched record index {deepest_index}")]
    NoMatch {
        deepest_index: usize,
        reason: NoMatchReason,
    },
    #[error("reflective target {0} is not defined in the model")]
    UnknownTarget(ApiSignature),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

/// A matched path through one supergraph for one log segment.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub callback: ApiSignature,
    pub callback_seq: u64,
    pub nodes: Vec<NodeId>,
    /// Record position (0 = callback) to the node it matched.
    pub match_points: BTreeMap<usize, NodeId>,
    /// Record position to index into `nodes`.
    pub match_positions: Vec<usize>,
    pub overlay: GraphOverlay,
    pub visited_count: u64,
    pub probe_visits: u64,
    pub ambiguous: bool,
    pub solutions_found: usize,
    /// Further satisfying paths, when full enumeration was requested.
    pub alternatives: Vec<Vec<NodeId>>,
    pub elapsed: std::time::Duration,
}

impl PathSegment {
    pub fn last_matched(&self) -> Option<NodeId> {
        self.match_positions.last().map(|&i| self.nodes[i])
    }
}
