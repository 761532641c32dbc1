use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::{AppModel, CalleeRef, EdgeKind, NodeId, StatementKind, Supergraph, SYNTHETIC_BIT};

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check every model invariant; an empty result means the model is valid.
pub fn validate(model: &AppModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |m: String| out.push(Diagnostic::new(m));

    // ids across supergraphs
    let mut owner: HashMap<NodeId, usize> = HashMap::new();
    let mut reported: HashSet<NodeId> = HashSet::new();
    for (gi, g) in model.supergraphs().iter().enumerate() {
        let mut local = HashSet::new();
        for n in g.nodes() {
            if !local.insert(n.id) {
                push(format!(
                    "node id {} duplicated in supergraph {}",
                    n.id, g.root_callback
                ));
                continue;
            }
            if n.id & SYNTHETIC_BIT != 0 {
                push(format!("node id {} uses the reserved synthetic range", n.id));
            }
            match owner.get(&n.id) {
                Some(&other) if other != gi => {
                    if reported.insert(n.id) {
                        push(format!("node id {} duplicated across supergraphs", n.id));
                    }
                }
                _ => {
                    owner.insert(n.id, gi);
                }
            }
        }
    }

    let callback_entries: HashSet<NodeId> = model
        .supergraphs()
        .iter()
        .filter_map(Supergraph::entry)
        .collect();

    let mut roots = HashSet::new();
    for g in model.supergraphs() {
        let root = &g.root_callback.signature;
        if !roots.insert(root.clone()) {
            push(format!("callback {root} has more than one supergraph"));
        }
        if !model.is_callback(root) {
            push(format!("supergraph root {root} is not in the callback registry"));
        }
        if g.method_cfg(root).is_none() {
            push(format!("supergraph {root} has no CFG for its root callback"));
        }
        validate_supergraph(g, &callback_entries, &mut push);
    }
    out
}

fn validate_supergraph(
    g: &Supergraph,
    callback_entries: &HashSet<NodeId>,
    push: &mut impl FnMut(String),
) {
    for m in g.methods() {
        let count = |k: fn(&StatementKind) -> bool| {
            m.nodes
                .iter()
                .filter(|&&id| g.node(id).is_some_and(|n| k(&n.statement.kind)))
                .count()
        };
        let entries = count(|k| matches!(k, StatementKind::Entry));
        let exits = count(|k| matches!(k, StatementKind::Exit));
        if entries != 1 {
            push(format!(
                "method {} has {entries} entry nodes (expected 1)",
                m.method
            ));
        }
        if exits > 1 {
            push(format!("method {} has {exits} exit nodes", m.method));
        }
    }

    for e in g.edges() {
        let Some(from) = g.node(e.from) else {
            push(format!("edge endpoint {} undefined", e.from));
            continue;
        };
        let to = g.node(e.to);
        let icc_guess = e.kind == EdgeKind::CallEnter
            && matches!(from.statement.callee(), Some(CalleeRef::Icc { .. }));
        if to.is_none() && !(icc_guess && callback_entries.contains(&e.to)) {
            push(format!("edge endpoint {} undefined", e.to));
            continue;
        }
        match e.kind {
            EdgeKind::Flow => {
                if let Some(to) = to {
                    if to.method != from.method {
                        push(format!("flow edge {e} crosses methods"));
                    }
                }
            }
            EdgeKind::CallEnter => match from.statement.callee() {
                Some(CalleeRef::Static(callee)) => {
                    let entry = g.method_cfg(&callee.signature).and_then(|m| m.entry);
                    if entry != Some(e.to) {
                        push(format!(
                            "call edge {e} does not enter the CFG of {}",
                            callee.signature
                        ));
                    }
                }
                Some(CalleeRef::Icc { .. }) => {
                    if !callback_entries.contains(&e.to) {
                        push(format!("icc edge {e} does not target a callback entry"));
                    }
                }
                _ => push(format!("call edge {e} leaves a node that is not a static or icc call")),
            },
            EdgeKind::Return => {
                if !from.is_exit() {
                    push(format!("return edge {e} does not leave an exit node"));
                    continue;
                }
                let entry = g.method_cfg(&from.method.signature).and_then(|m| m.entry);
                let ok = g.edges().iter().any(|c| {
                    c.kind == EdgeKind::CallEnter
                        && Some(c.to) == entry
                        && g.flow_successor(c.from) == Some(e.to)
                });
                if !ok {
                    push(format!(
                        "return edge {e} does not reach the flow successor of a call site"
                    ));
                }
            }
        }
    }

    for n in g.nodes() {
        match &n.statement.kind {
            StatementKind::Branch { .. } => {
                let succ: HashSet<NodeId> = g
                    .out_edges(n.id)
                    .filter(|e| e.kind == EdgeKind::Flow)
                    .map(|e| e.to)
                    .collect();
                if succ.len() < 2 {
                    push(format!("branch node {} has fewer than 2 successors", n.id));
                }
            }
            StatementKind::Call(CalleeRef::Static(callee)) => {
                if g.method_cfg(&callee.signature).is_none() {
                    push(format!(
                        "node {} calls app method {} which has no CFG in supergraph {}",
                        n.id, callee.signature, g.root_callback
                    ));
                } else if !g.out_edges(n.id).any(|e| e.kind == EdgeKind::CallEnter) {
                    push(format!("call node {} has no call edge", n.id));
                }
                let flows = g
                    .out_edges(n.id)
                    .filter(|e| e.kind == EdgeKind::Flow)
                    .count();
                if flows != 1 {
                    push(format!(
                        "call node {} has {flows} flow successors (expected 1)",
                        n.id
                    ));
                }
            }
            _ => {}
        }
    }

    // every node of a method reachable from its entry along flow edges
    for m in g.methods() {
        let Some(entry) = m.entry else { continue };
        let mut seen = HashSet::from([entry]);
        let mut queue = VecDeque::from([entry]);
        while let Some(id) = queue.pop_front() {
            for e in g.out_edges(id).filter(|e| e.kind == EdgeKind::Flow) {
                if g.contains(e.to) && seen.insert(e.to) {
                    queue.push_back(e.to);
                }
            }
        }
        for id in &m.nodes {
            if !seen.contains(id) {
                push(format!(
                    "node {id} unreachable from entry of method {}",
                    m.method
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_app_model_unchecked;

    fn model(nodes: &str, edges: &str) -> AppModel {
        let src = format!(
            r#"{{"callbacks": ["a.B.cb()V"], "logged_apis": [], "library_prefixes": [],
                "supergraphs": [{{"root": "a.B.cb()V", "nodes": [{nodes}], "edges": [{edges}]}}]}}"#
        );
        load_app_model_unchecked(src.as_bytes()).unwrap()
    }

    const E: &str = r#"{"id": 1, "method": "a.B.cb()V", "kind": "entry", "display": "e"}"#;
    const X: &str = r#"{"id": 3, "method": "a.B.cb()V", "kind": "exit", "display": "x"}"#;

    #[test]
    fn valid_model_has_no_diagnostics() {
        let p = r#"{"id": 2, "method": "a.B.cb()V", "kind": "plain", "display": "p"}"#;
        let m = model(&format!("{E},{p},{X}"), r#"[1,2,"flow"],[2,3,"flow"]"#);
        assert!(validate(&m).is_empty(), "{:?}", validate(&m));
    }

    #[test]
    fn unreachable_node_is_named() {
        // node 4 is only reachable from itself; BFS from entry {1,2,3} misses it
        let p = r#"{"id": 2, "method": "a.B.cb()V", "kind": "plain", "display": "p"}"#;
        let q = r#"{"id": 4, "method": "a.B.cb()V", "kind": "plain", "display": "q"}"#;
        let m = model(
            &format!("{E},{p},{X},{q}"),
            r#"[1,2,"flow"],[2,3,"flow"],[4,3,"flow"]"#,
        );
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("node 4 unreachable"), "{d:?}");
    }

    #[test]
    fn duplicate_ids_across_supergraphs() {
        let src = r#"{"callbacks": ["a.B.cb()V", "a.C.cb()V"], "logged_apis": [], "library_prefixes": [],
            "supergraphs": [
              {"root": "a.B.cb()V", "nodes": [{"id": 5, "method": "a.B.cb()V", "kind": "entry", "display": "e"}], "edges": []},
              {"root": "a.C.cb()V", "nodes": [{"id": 5, "method": "a.C.cb()V", "kind": "entry", "display": "e"}], "edges": []}]}"#;
        let m = load_app_model_unchecked(src.as_bytes()).unwrap();
        let d = validate(&m);
        assert_eq!(d, vec![Diagnostic::new("node id 5 duplicated across supergraphs")]);
    }

    #[test]
    fn branch_needs_two_successors() {
        let b = r#"{"id": 2, "method": "a.B.cb()V", "kind": "branch", "display": "if x"}"#;
        let m = model(&format!("{E},{b},{X}"), r#"[1,2,"flow"],[2,3,"flow"]"#);
        let d = validate(&m);
        assert!(d.iter().any(|d| d.message.contains("branch node 2")), "{d:?}");
    }

    #[test]
    fn root_must_be_registered() {
        let src = r#"{"callbacks": [], "logged_apis": [], "library_prefixes": [],
            "supergraphs": [{"root": "a.B.cb()V", "nodes": [{"id": 1, "method": "a.B.cb()V", "kind": "entry", "display": "e"}], "edges": []}]}"#;
        let m = load_app_model_unchecked(src.as_bytes()).unwrap();
        assert!(validate(&m)
            .iter()
            .any(|d| d.message.contains("not in the callback registry")));
    }
}
