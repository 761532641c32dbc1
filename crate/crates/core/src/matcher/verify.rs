//! Independent replay of a walk against its log segment.

use std::collections::HashSet;

use thiserror::Error;

use super::update_successors;
use crate::graph::{AppModel, CalleeRef, EdgeKind, GraphOverlay, NodeId};
use crate::log::{LogSegment, Special};
use crate::signature::ApiSignature;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("walk step {step}: {message}")]
pub struct Violation {
    pub step: usize,
    pub message: String,
}

fn fail<T>(step: usize, message: impl Into<String>) -> Result<T, Violation> {
    Err(Violation {
        step,
        message: message.into(),
    })
}

/// Check that `nodes` is a valid interprocedural walk from the callback
/// entry whose logged nodes are exactly those at `positions` (one per
/// record, callback at 0), with stack depth and caller windows agreeing
/// with every record. Overlay updates are re-derived along the walk.
pub fn verify_walk(
    model: &AppModel,
    seg: &LogSegment,
    k: usize,
    nodes: &[NodeId],
    positions: &[usize],
) -> Result<(), Violation> {
    let cb = &seg.callback.des.signature;
    let Some(g) = model.supergraph_for(cb) else {
        return fail(0, format!("no supergraph for {cb}"));
    };
    if nodes.first().copied() != g.entry() {
        return fail(0, "walk does not start at the callback entry");
    }
    if positions.len() != seg.len() {
        return fail(0, format!("{} match positions for {} records", positions.len(), seg.len()));
    }
    if positions.first() != Some(&0) || positions.windows(2).any(|w| w[0] >= w[1]) {
        return fail(0, "match positions must start at 0 and increase strictly");
    }
    if positions.last().is_some_and(|&p| p >= nodes.len()) {
        return fail(0, "match position beyond the walk");
    }
    let logged: HashSet<&ApiSignature> = model
        .logged_apis()
        .iter()
        .chain(seg.body.iter().map(|r| &r.des.signature))
        .collect();
    let mut overlay = GraphOverlay::new();
    let mut stack: Vec<(ApiSignature, Option<NodeId>)> = vec![(g.root_callback.signature.clone(), None)];
    let mut next_record = 1usize;
    let mut depth_at_last = 1usize;
    for step in 0..nodes.len() {
        let id = nodes[step];
        let Some(node) = overlay.node(g, id).cloned() else {
            return fail(step, format!("node {id} does not exist"));
        };
        if step > 0 {
            let prev = nodes[step - 1];
            let Some(edge) = overlay.has_edge(g, prev, id) else {
                return fail(step, format!("no edge {prev} -> {id}"));
            };
            match edge.kind {
                EdgeKind::Flow => {
                    let skips = overlay.node(g, prev).is_some_and(|n| {
                        matches!(n.statement.callee(), Some(CalleeRef::Static(_)))
                    });
                    if skips {
                        return fail(step, format!("call {prev} skips its callee"));
                    }
                }
                EdgeKind::CallEnter => {
                    let ret = overlay.return_site(g, prev);
                    stack.push((node.method.signature.clone(), ret));
                }
                EdgeKind::Return => {
                    let Some((_, ret)) = stack.pop() else {
                        return fail(step, "return with empty stack");
                    };
                    if ret != Some(id) || stack.is_empty() {
                        return fail(step, format!("return to {id} does not match the call site"));
                    }
                }
            }
        }
        if stack.last().map(|f| &f.0) != Some(&node.method.signature) {
            return fail(step, format!("node {id} is not in the method on top of the stack"));
        }
        let is_match = positions.get(next_record) == Some(&step);
        let is_logged = node.statement.api().is_some_and(|a| logged.contains(a));
        if step == 0 {
            continue;
        }
        if is_logged != is_match {
            return fail(step, format!("logged node {id} and record positions disagree"));
        }
        if !is_match {
            continue;
        }
        let rec = &seg.body[next_record - 1];
        let prev_rec = seg.get(next_record - 1).expect("previous record");
        if node.statement.api() != Some(&rec.des.signature) {
            return fail(step, format!("node {id} does not call {}", rec.des.signature));
        }
        let delta_d = i64::from(rec.csi.d) - i64::from(prev_rec.csi.d);
        if stack.len() as i64 - depth_at_last as i64 != delta_d {
            return fail(step, format!("stack depth change disagrees with record seq {}", rec.seq));
        }
        let want = stack.len().min(k);
        let frames: Vec<&ApiSignature> = stack[stack.len() - want..].iter().map(|f| &f.0).collect();
        if rec.csi.p.iter().collect::<Vec<_>>() != frames {
            return fail(step, format!("caller window disagrees with record seq {}", rec.seq));
        }
        let fits = matches!(
            (node.statement.callee(), &rec.des.special),
            (Some(CalleeRef::Reflective { .. }), Special::Reflective { .. })
                | (Some(CalleeRef::Icc { .. }), Special::Icc { .. })
        );
        if fits {
            if let Err(e) = update_successors(&mut overlay, g, &node, &rec.des, model) {
                return fail(step, e.to_string());
            }
        }
        depth_at_last = stack.len();
        next_record += 1;
    }
    Ok(())
}
