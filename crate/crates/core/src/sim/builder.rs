//! Programmatic construction of app models.

use std::collections::HashMap;

use crate::graph::{AppModel, CalleeRef, Edge, EdgeKind, Node, NodeId, Statement, StatementKind, Supergraph};
use crate::signature::{ApiSignature, MethodId, FRAMEWORK_PREFIXES};

fn sig(s: &str) -> ApiSignature {
    s.parse()
        .unwrap_or_else(|e| panic!("invalid signature {s:?}: {e}"))
}

/// Builds an [`AppModel`] one supergraph at a time. Node ids are global
/// and allocated in creation order starting at 1.
#[derive(Debug, Default)]
pub struct ModelBuilder {
    next_id: NodeId,
    supergraphs: Vec<Supergraph>,
    callbacks: Vec<ApiSignature>,
    logged: Vec<ApiSignature>,
    prefixes: Vec<String>,
    deferred: Vec<Edge>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self {
            next_id: 1,
            prefixes: FRAMEWORK_PREFIXES.iter().map(|p| p.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn logged(&mut self, api: &str) -> &mut Self {
        let api = sig(api);
        if !self.logged.contains(&api) {
            self.logged.push(api);
        }
        self
    }

    pub fn prefixes(&mut self, prefixes: Vec<String>) -> &mut Self {
        self.prefixes = prefixes;
        self
    }

    /// Start the supergraph rooted at callback `root`.
    pub fn supergraph(&mut self, root: &str) -> SupergraphBuilder<'_> {
        let root = sig(root);
        self.callbacks.push(root.clone());
        SupergraphBuilder {
            model: self,
            root: MethodId::app(root),
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Edge added at [`build`](Self::build) time to the supergraph that
    /// owns `edge.from`; used for ICC targets not yet built.
    pub fn deferred_edge(&mut self, edge: Edge) -> &mut Self {
        self.deferred.push(edge);
        self
    }

    pub fn build(mut self) -> AppModel {
        for e in std::mem::take(&mut self.deferred) {
            if let Some(g) = self.supergraphs.iter_mut().find(|g| g.contains(e.from)) {
                let mut edges = g.edges().to_vec();
                edges.push(e);
                *g = Supergraph::new(g.root_callback.clone(), g.nodes().to_vec(), edges);
            }
        }
        AppModel::new(self.supergraphs, self.callbacks, self.logged, self.prefixes)
    }
}

pub struct SupergraphBuilder<'a> {
    model: &'a mut ModelBuilder,
    root: MethodId,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl SupergraphBuilder<'_> {
    /// Nodes created so far in this supergraph.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn add(&mut self, method: &str, kind: StatementKind, display: &str) -> NodeId {
        let id = self.model.next_id;
        self.model.next_id += 1;
        self.nodes.push(Node {
            id,
            method: MethodId::app(sig(method)),
            statement: Statement {
                kind,
                display: display.to_string(),
            },
        });
        id
    }

    pub fn entry(&mut self, method: &str) -> NodeId {
        self.add(method, StatementKind::Entry, "entry")
    }

    pub fn exit(&mut self, method: &str) -> NodeId {
        self.add(method, StatementKind::Exit, "exit")
    }

    pub fn plain(&mut self, method: &str, display: &str) -> NodeId {
        self.add(method, StatementKind::Plain, display)
    }

    pub fn branch(&mut self, method: &str, condition: &str) -> NodeId {
        self.add(
            method,
            StatementKind::Branch {
                condition: condition.to_string(),
            },
            condition,
        )
    }

    /// Call of an app method whose CFG lives in this supergraph.
    pub fn call_app(&mut self, method: &str, callee: &str) -> NodeId {
        let c = CalleeRef::Static(MethodId::app(sig(callee)));
        self.add(method, StatementKind::Call(c), callee)
    }

    pub fn call_framework(&mut self, method: &str, api: &str, display: &str) -> NodeId {
        self.add(method, StatementKind::Call(CalleeRef::Framework(sig(api))), display)
    }

    pub fn reflective(&mut self, method: &str, api: &str, display: &str) -> NodeId {
        self.add(method, StatementKind::Call(CalleeRef::Reflective { api: sig(api) }), display)
    }

    pub fn icc(&mut self, method: &str, api: &str, display: &str) -> NodeId {
        self.add(method, StatementKind::Call(CalleeRef::Icc { api: sig(api) }), display)
    }

    pub fn flow(&mut self, from: NodeId, to: NodeId) -> &mut Self {
        self.edges.push(Edge::new(from, to, EdgeKind::Flow));
        self
    }

    /// Flow edges along `ids`.
    pub fn chain(&mut self, ids: &[NodeId]) -> &mut Self {
        for w in ids.windows(2) {
            self.flow(w[0], w[1]);
        }
        self
    }

    /// Possible ICC target: call edge from `site` to a callback entry.
    pub fn icc_target(&mut self, site: NodeId, callback_entry: NodeId) -> &mut Self {
        self.edges.push(Edge::new(site, callback_entry, EdgeKind::CallEnter));
        self
    }

    /// Add call and return edges for every static call whose callee CFG is
    /// in this supergraph, then register the supergraph.
    pub fn finish(mut self) {
        let mut bounds: HashMap<&ApiSignature, (Option<NodeId>, Option<NodeId>)> = HashMap::new();
        for n in &self.nodes {
            let b = bounds.entry(&n.method.signature).or_default();
            match n.statement.kind {
                StatementKind::Entry => b.0 = Some(n.id),
                StatementKind::Exit => b.1 = Some(n.id),
                _ => {}
            }
        }
        let mut linked = Vec::new();
        for n in &self.nodes {
            let Some(CalleeRef::Static(callee)) = n.statement.callee() else {
                continue;
            };
            let Some(&(entry, exit)) = bounds.get(&callee.signature) else {
                continue;
            };
            if let Some(entry) = entry {
                linked.push(Edge::new(n.id, entry, EdgeKind::CallEnter));
            }
            let ret = self
                .edges
                .iter()
                .find(|e| e.from == n.id && e.kind == EdgeKind::Flow)
                .map(|e| e.to);
            if let (Some(exit), Some(ret)) = (exit, ret) {
                linked.push(Edge::new(exit, ret, EdgeKind::Return));
            }
        }
        // call edges first so static calls list their callee before the return site
        let mut edges = Vec::with_capacity(self.edges.len() + linked.len());
        edges.extend(linked.iter().filter(|e| e.kind == EdgeKind::CallEnter));
        edges.append(&mut self.edges);
        edges.extend(linked.iter().filter(|e| e.kind == EdgeKind::Return));
        let g = Supergraph::new(self.root, self.nodes, edges);
        self.model.supergraphs.push(g);
    }
}
