//! Whole-log matching: scope, filter, divide per thread and callback,
//! match every segment, combine.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::run;
use super::{MatchConfig, MatchError, NoMatchReason, PathSegment, SilentMethods, Strategy};
use crate::graph::{AppModel, EdgeKind, NodeId};
use crate::log::{
    partition_by_thread, records_without_caller, scope, segment, split_library_records,
    LogSegment, LogSequence,
};
use crate::signature::ApiSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    Matched,
    NoMatch,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayNode {
    pub id: NodeId,
    pub method: ApiSignature,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub callback: ApiSignature,
    pub callback_seq: u64,
    pub status: SegmentStatus,
    pub nodes: Vec<NodeId>,
    /// Record seq to the node it matched.
    pub match_points: BTreeMap<u64, NodeId>,
    pub visited: u64,
    pub probe_visits: u64,
    pub ambiguous: bool,
    pub solutions_found: usize,
    pub alternatives: Vec<Vec<NodeId>>,
    pub overlay_nodes: Vec<OverlayNode>,
    pub overlay_edges: Vec<(NodeId, NodeId, EdgeKind)>,
    pub removed_edges: Vec<(NodeId, NodeId, EdgeKind)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deepest_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<NoMatchReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadReport {
    pub tid: u32,
    pub segments: Vec<SegmentReport>,
    pub joins: Vec<(NodeId, NodeId)>,
    /// Seq numbers of records before the thread's first callback.
    pub prelude: Vec<u64>,
    /// Matched segment paths, in segment order; `None` where matching failed.
    #[serde(skip)]
    pub paths: Vec<Option<PathSegment>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub strategy: Strategy,
    pub pid: Option<u32>,
    pub k: usize,
    pub threads: Vec<ThreadReport>,
    /// Seq numbers of records dropped as library noise.
    pub library_records: Vec<u64>,
    pub diagnostics: Vec<String>,
}

impl MatchReport {
    pub fn segments(&self) -> impl Iterator<Item = &SegmentReport> {
        self.threads.iter().flat_map(|t| t.segments.iter())
    }

    pub fn all_matched(&self) -> bool {
        self.segments().all(|s| s.status == SegmentStatus::Matched)
    }

    pub fn any_ambiguous(&self) -> bool {
        self.segments().any(|s| s.ambiguous)
    }

    /// Matched paths in thread order.
    pub fn paths(&self) -> impl Iterator<Item = &PathSegment> {
        self.threads
            .iter()
            .flat_map(|t| t.paths.iter().flatten())
    }
}

impl PartialEq for PathSegment {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.match_points == other.match_points
    }
}

fn report_segment(seg: &LogSegment, result: &Result<PathSegment, MatchError>) -> SegmentReport {
    let mut r = SegmentReport {
        callback: seg.callback.des.signature.clone(),
        callback_seq: seg.callback.seq,
        status: SegmentStatus::Matched,
        nodes: Vec::new(),
        match_points: BTreeMap::new(),
        visited: 0,
        probe_visits: 0,
        ambiguous: false,
        solutions_found: 0,
        alternatives: Vec::new(),
        overlay_nodes: Vec::new(),
        overlay_edges: Vec::new(),
        removed_edges: Vec::new(),
        deepest_index: None,
        reason: None,
        error: None,
        elapsed_ms: 0.0,
    };
    match result {
        Ok(p) => {
            r.nodes = p.nodes.clone();
            r.match_points = p
                .match_points
                .iter()
                .filter_map(|(&pos, &n)| seg.get(pos).map(|rec| (rec.seq, n)))
                .collect();
            r.visited = p.visited_count;
            r.probe_visits = p.probe_visits;
            r.ambiguous = p.ambiguous;
            r.solutions_found = p.solutions_found;
            r.alternatives = p.alternatives.clone();
            r.overlay_nodes = p
                .overlay
                .added_nodes()
                .iter()
                .map(|n| OverlayNode {
                    id: n.id,
                    method: n.method.signature.clone(),
                    display: n.statement.display.clone(),
                })
                .collect();
            r.overlay_edges = p
                .overlay
                .added_edges()
                .iter()
                .map(|e| (e.from, e.to, e.kind))
                .collect();
            r.removed_edges = p
                .overlay
                .removed_edges()
                .iter()
                .map(|e| (e.from, e.to, e.kind))
                .collect();
            r.elapsed_ms = p.elapsed.as_secs_f64() * 1e3;
        }
        Err(MatchError::NoMatch {
            deepest_index,
            reason,
        }) => {
            r.status = SegmentStatus::NoMatch;
            r.deepest_index = Some(*deepest_index);
            r.reason = Some(*reason);
            r.error = result.as_ref().err().map(ToString::to_string);
        }
        Err(e) => {
            r.status = SegmentStatus::Error;
            r.error = Some(e.to_string());
        }
    }
    r
}

/// Infer the app process: the pid of the first callback record.
fn infer_pid(model: &AppModel, seq: &LogSequence) -> Option<u32> {
    seq.records
        .iter()
        .find(|r| model.is_callback(&r.des.signature))
        .or(seq.records.first())
        .map(|r| r.pid)
}

/// Run the full pipeline over a raw log.
pub fn match_all(model: &AppModel, seq: &LogSequence, cfg: &MatchConfig) -> MatchReport {
    let mut diagnostics = Vec::new();
    let pid = cfg.pid.or_else(|| infer_pid(model, seq));
    let scoped = match pid {
        Some(pid) => scope(seq, pid),
        None => seq.clone(),
    };
    let prefixes: Vec<String> = cfg
        .prefixes
        .clone()
        .unwrap_or_else(|| model.library_prefixes().to_vec());
    let (kept, removed) = split_library_records(&scoped, &prefixes);
    let no_caller = records_without_caller(&kept);
    if !no_caller.is_empty() {
        diagnostics.push(format!(
            "{} records carry no caller frame: {:?}",
            no_caller.len(),
            no_caller
        ));
    }
    let threads: Vec<_> = partition_by_thread(&kept)
        .into_iter()
        .map(|t| {
            let tid = t.records.first().map_or(0, |r| r.tid);
            (tid, segment(&t, model.callback_set()))
        })
        .collect();
    let jobs: Vec<(usize, usize, &LogSegment)> = threads
        .iter()
        .enumerate()
        .flat_map(|(t, (_, s))| s.segments.iter().enumerate().map(move |(i, seg)| (t, i, seg)))
        .collect();
    let silent = SilentMethods::compute(model);
    let work = || -> Vec<Result<PathSegment, MatchError>> {
        jobs.par_iter()
            .map(|(_, _, seg)| run(model, seg, cfg, &silent))
            .collect()
    };
    let results = if cfg.jobs > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        }
    } else {
        work()
    };
    let mut grouped: Vec<Vec<Result<PathSegment, MatchError>>> =
        threads.iter().map(|_| Vec::new()).collect();
    for ((t, _, _), r) in jobs.iter().zip(results) {
        grouped[*t].push(r);
    }
    let threads = threads
        .iter()
        .zip(grouped)
        .map(|((tid, seg), results)| {
            if !seg.prelude.is_empty() {
                diagnostics.push(format!(
                    "thread {tid}: {} records precede the first callback",
                    seg.prelude.len()
                ));
            }
            let segments: Vec<SegmentReport> = seg
                .segments
                .iter()
                .zip(&results)
                .map(|(s, r)| report_segment(s, r))
                .collect();
            let paths: Vec<Option<PathSegment>> = results.into_iter().map(Result::ok).collect();
            let joins = paths
                .windows(2)
                .filter_map(|w| match (&w[0], &w[1]) {
                    (Some(a), Some(b)) => {
                        let to = model.supergraph_for(&b.callback)?.entry()?;
                        Some((a.last_matched()?, to))
                    }
                    _ => None,
                })
                .collect();
            ThreadReport {
                tid: *tid,
                segments,
                joins,
                prelude: seg.prelude.iter().map(|r| r.seq).collect(),
                paths,
            }
        })
        .collect();
    MatchReport {
        strategy: cfg.strategy,
        pid,
        k: seq.k,
        threads,
        library_records: removed.iter().map(|r| r.seq).collect(),
        diagnostics,
    }
}
