//! Rebuild successors of reflective and ICC call sites from log arguments.

use std::collections::{BTreeSet, HashSet, VecDeque};

use sha2::{Digest, Sha256};

use super::MatchError;
use crate::graph::{
    AppModel, CalleeRef, Edge, EdgeKind, EmbedRecord, GraphOverlay, Node, NodeId, Statement,
    StatementKind, Supergraph, SYNTHETIC_BIT,
};
use crate::log::{Des, Special};
use crate::signature::{is_framework_unit, ApiSignature};

/// Sentinel "original id" for the explicit-invocation node of a framework target.
const EXPLICIT_CALL: NodeId = u64::MAX;

/// Id of the clone of `original` embedded at `site` for `target`.
pub fn synthetic_id(site: NodeId, target: &ApiSignature, original: NodeId) -> NodeId {
    let mut h = Sha256::new();
    h.update(site.to_le_bytes());
    h.update(target.as_str().as_bytes());
    h.update(original.to_le_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b) | SYNTHETIC_BIT
}

/// Update the successors of call site `n` from a record's description and
/// return the successors relevant to that target. Memoized per
/// `(n.id, target)`.
pub fn update_successors(
    overlay: &mut GraphOverlay,
    g: &Supergraph,
    n: &Node,
    des: &Des,
    model: &AppModel,
) -> Result<Vec<NodeId>, MatchError> {
    let key = des
        .target_key()
        .ok_or_else(|| MatchError::Contract(format!("record for node {} carries no target", n.id)))?;
    match (n.statement.callee(), &des.special) {
        (Some(CalleeRef::Reflective { .. }), Special::Reflective { .. })
        | (Some(CalleeRef::Icc { .. }), Special::Icc { .. }) => {}
        _ => {
            return Err(MatchError::Contract(format!(
                "node {} cannot be updated from a {:?} record",
                n.id, des.special
            )))
        }
    }
    if let Some(rec) = overlay.memo(n.id, &key) {
        return Ok(rec.successors.clone());
    }
    let rec = match &des.special {
        Special::Reflective { target } => reflective(overlay, g, n, target, model)?,
        Special::Icc {
            target_component, ..
        } => icc(overlay, g, n, target_component, model)?,
        Special::None => unreachable!("checked above"),
    };
    let successors = rec.successors.clone();
    overlay.insert_memo(n.id, key, rec);
    Ok(successors)
}

fn reflective(
    overlay: &mut GraphOverlay,
    g: &Supergraph,
    n: &Node,
    target: &ApiSignature,
    model: &AppModel,
) -> Result<EmbedRecord, MatchError> {
    let succ = overlay.return_site(g, n.id);
    if let Some((src, cfg)) = model.find_method(target, Some(g)) {
        let entry = cfg
            .entry
            .ok_or_else(|| MatchError::Contract(format!("method {target} has no entry")))?;
        embed_closure(overlay, g, src, n.id, target, model)?;
        let clone_entry = synthetic_id(n.id, target, entry);
        overlay.add_edge(g, Edge::new(n.id, clone_entry, EdgeKind::CallEnter))?;
        if let (Some(exit), Some(succ)) = (cfg.exit, succ) {
            overlay.add_edge(
                g,
                Edge::new(synthetic_id(n.id, target, exit), succ, EdgeKind::Return),
            )?;
            overlay.set_return_site(n.id, succ);
        }
        return Ok(EmbedRecord {
            root: clone_entry,
            successors: vec![clone_entry],
        });
    }
    if !is_framework_unit(target.declaring_unit()) {
        return Err(MatchError::UnknownTarget(target.clone()));
    }
    let id = synthetic_id(n.id, target, EXPLICIT_CALL);
    overlay.add_node(Node {
        id,
        method: n.method.clone(),
        statement: Statement {
            kind: StatementKind::Call(CalleeRef::Framework(target.clone())),
            display: format!("{target} [explicit call of reflective site {}]", n.id),
        },
    });
    overlay.add_edge(g, Edge::new(n.id, id, EdgeKind::Flow))?;
    if let Some(succ) = succ {
        overlay.add_edge(g, Edge::new(id, succ, EdgeKind::Flow))?;
        overlay.set_return_site(n.id, succ);
    }
    Ok(EmbedRecord {
        root: id,
        successors: vec![id],
    })
}

/// Clone `target` and every app method statically reachable from it.
fn embed_closure(
    overlay: &mut GraphOverlay,
    g: &Supergraph,
    src: &Supergraph,
    site: NodeId,
    target: &ApiSignature,
    model: &AppModel,
) -> Result<(), MatchError> {
    let mut methods: BTreeSet<ApiSignature> = BTreeSet::from([target.clone()]);
    let mut queue = VecDeque::from([target.clone()]);
    let mut members: Vec<NodeId> = Vec::new();
    while let Some(m) = queue.pop_front() {
        let Some(cfg) = src.method_cfg(&m) else {
            continue;
        };
        for &id in &cfg.nodes {
            members.push(id);
            if let Some(CalleeRef::Static(callee)) = src.node(id).and_then(|n| n.statement.callee()) {
                if methods.insert(callee.signature.clone()) {
                    queue.push_back(callee.signature.clone());
                }
            }
        }
    }
    let inside: HashSet<NodeId> = members.iter().copied().collect();
    let callback_entries: HashSet<NodeId> = model
        .supergraphs()
        .iter()
        .filter_map(Supergraph::entry)
        .collect();
    for &id in &members {
        let orig = src.node(id).expect("member of its own supergraph");
        overlay.add_node(Node {
            id: synthetic_id(site, target, id),
            ..orig.clone()
        });
    }
    for &id in &members {
        for e in src.out_edges(id) {
            let to = if inside.contains(&e.to) {
                synthetic_id(site, target, e.to)
            } else if e.kind == EdgeKind::CallEnter && callback_entries.contains(&e.to) {
                // icc guess into another callback keeps its global id
                e.to
            } else {
                continue;
            };
            overlay.add_edge(g, Edge::new(synthetic_id(site, target, id), to, e.kind))?;
        }
    }
    Ok(())
}

fn icc(
    overlay: &mut GraphOverlay,
    g: &Supergraph,
    n: &Node,
    target_component: &str,
    model: &AppModel,
) -> Result<EmbedRecord, MatchError> {
    let targets: Vec<NodeId> = model
        .callbacks_in_unit(target_component)
        .filter_map(Supergraph::entry)
        .collect();
    let guesses: Vec<Edge> = overlay
        .out_edges(g, n.id)?
        .into_iter()
        .filter(|e| e.kind == EdgeKind::CallEnter)
        .collect();
    let mut kept = false;
    for e in guesses {
        if targets.contains(&e.to) {
            kept = true;
        } else if g.out_edges(n.id).any(|b| *b == e) {
            overlay.remove_edge(g, e)?;
        }
    }
    let root = targets.first().copied();
    if let (false, Some(t)) = (kept, root) {
        overlay.add_edge(g, Edge::new(n.id, t, EdgeKind::CallEnter))?;
    }
    Ok(EmbedRecord {
        root: root.unwrap_or(n.id),
        successors: crate::graph::neighbors(g, overlay, n.id)?,
    })
}
