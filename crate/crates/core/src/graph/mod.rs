//! Application model: per-callback supergraphs of statement nodes.

mod json;
mod overlay;
mod validate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{ApiSignature, MethodId};

pub use json::{load_app_model, load_app_model_unchecked, to_json, to_json_pretty};
pub use overlay::{neighbors, EmbedRecord, GraphOverlay, LookupError};
pub use validate::{validate, Diagnostic};

pub type NodeId = u64;

/// Ids with this bit set are reserved for nodes synthesized at match time.
pub const SYNTHETIC_BIT: NodeId = 1 << 63;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {}", join_diagnostics(.0))]
    Validation(Vec<Diagnostic>),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CalleeRef {
    /// Direct call into an app-defined method with its own CFG.
    Static(MethodId),
    /// Call of a platform API with no CFG in the model.
    Framework(ApiSignature),
    /// Reflective dispatch through `api` (e.g. `Method.invoke`); target known only at run time.
    Reflective { api: ApiSignature },
    /// Inter-component call through `api` (e.g. `startActivity`).
    Icc { api: ApiSignature },
}

impl CalleeRef {
    /// The API signature a log record would carry for this call, if any.
    pub fn api(&self) -> Option<&ApiSignature> {
        match self {
            CalleeRef::Static(_) => None,
            CalleeRef::Framework(s) => Some(s),
            CalleeRef::Reflective { api } | CalleeRef::Icc { api } => Some(api),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StatementKind {
    Plain,
    Branch { condition: String },
    Call(CalleeRef),
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Statement {
    pub kind: StatementKind,
    pub display: String,
}

impl Statement {
    pub fn callee(&self) -> Option<&CalleeRef> {
        match &self.kind {
            StatementKind::Call(c) => Some(c),
            _ => None,
        }
    }

    pub fn api(&self) -> Option<&ApiSignature> {
        self.callee().and_then(CalleeRef::api)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: NodeId,
    pub method: MethodId,
    pub statement: Statement,
}

impl Node {
    pub fn is_entry(&self) -> bool {
        matches!(self.statement.kind, StatementKind::Entry)
    }

    pub fn is_exit(&self) -> bool {
        matches!(self.statement.kind, StatementKind::Exit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Flow,
    #[serde(rename = "call")]
    CallEnter,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId, kind: EdgeKind) -> Self {
        Self { from, to, kind }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} ({:?})", self.from, self.to, self.kind)
    }
}

/// Entry/exit of one method's CFG inside a supergraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodCfg {
    pub method: MethodId,
    pub entry: Option<NodeId>,
    pub exit: Option<NodeId>,
    pub nodes: Vec<NodeId>,
}

/// The CFGs of every method reachable from one callback, joined by call and
/// return edges. Edge order is significant: it is the neighbor visiting order.
#[derive(Debug, Clone)]
pub struct Supergraph {
    pub root_callback: MethodId,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    out: HashMap<NodeId, Vec<usize>>,
    methods: BTreeMap<ApiSignature, MethodCfg>,
}

impl PartialEq for Supergraph {
    fn eq(&self, other: &Self) -> bool {
        self.root_callback == other.root_callback
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl Supergraph {
    pub fn new(root_callback: MethodId, nodes: Vec<Node>, edges: Vec<Edge>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        let mut methods: BTreeMap<ApiSignature, MethodCfg> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
            let cfg = methods
                .entry(n.method.signature.clone())
                .or_insert_with(|| MethodCfg {
                    method: n.method.clone(),
                    entry: None,
                    exit: None,
                    nodes: Vec::new(),
                });
            cfg.nodes.push(n.id);
            match n.statement.kind {
                StatementKind::Entry if cfg.entry.is_none() => cfg.entry = Some(n.id),
                StatementKind::Exit if cfg.exit.is_none() => cfg.exit = Some(n.id),
                _ => {}
            }
        }
        let mut out: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            out.entry(e.from).or_default().push(i);
        }
        Self {
            root_callback,
            nodes,
            edges,
            index,
            out,
            methods,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Outgoing edges of `id` in declaration order.
    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.out
            .get(&id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn method_cfg(&self, sig: &ApiSignature) -> Option<&MethodCfg> {
        self.methods.get(sig)
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodCfg> {
        self.methods.values()
    }

    /// Entry node of the root callback.
    pub fn entry(&self) -> Option<NodeId> {
        self.method_cfg(&self.root_callback.signature)
            .and_then(|m| m.entry)
    }

    /// First base Flow successor of `id`: where a call at `id` returns to.
    pub fn flow_successor(&self, id: NodeId) -> Option<NodeId> {
        self.out_edges(id)
            .find(|e| e.kind == EdgeKind::Flow)
            .map(|e| e.to)
    }

    /// Number of nodes with at least two distinct successors.
    pub fn branch_node_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| {
                let succ: HashSet<NodeId> = self.out_edges(n.id).map(|e| e.to).collect();
                succ.len() >= 2
            })
            .count()
    }
}

/// The full static model of an app.
#[derive(Debug, Clone)]
pub struct AppModel {
    supergraphs: Vec<Supergraph>,
    callback_registry: Vec<ApiSignature>,
    logged_apis: Vec<ApiSignature>,
    library_prefixes: Vec<String>,
    logged_set: HashSet<ApiSignature>,
    callback_set: HashSet<ApiSignature>,
    by_root: HashMap<ApiSignature, usize>,
    node_home: HashMap<NodeId, usize>,
}

impl PartialEq for AppModel {
    fn eq(&self, other: &Self) -> bool {
        self.supergraphs == other.supergraphs
            && self.callback_registry == other.callback_registry
            && self.logged_apis == other.logged_apis
            && self.library_prefixes == other.library_prefixes
    }
}

impl AppModel {
    pub fn new(
        supergraphs: Vec<Supergraph>,
        callback_registry: Vec<ApiSignature>,
        logged_apis: Vec<ApiSignature>,
        library_prefixes: Vec<String>,
    ) -> Self {
        let mut by_root = HashMap::new();
        let mut node_home = HashMap::new();
        for (i, g) in supergraphs.iter().enumerate() {
            by_root
                .entry(g.root_callback.signature.clone())
                .or_insert(i);
            for n in g.nodes() {
                node_home.entry(n.id).or_insert(i);
            }
        }
        Self {
            logged_set: logged_apis.iter().cloned().collect(),
            callback_set: callback_registry.iter().cloned().collect(),
            supergraphs,
            callback_registry,
            logged_apis,
            library_prefixes,
            by_root,
            node_home,
        }
    }

    pub fn supergraphs(&self) -> &[Supergraph] {
        &self.supergraphs
    }

    pub fn callback_registry(&self) -> &[ApiSignature] {
        &self.callback_registry
    }

    pub fn logged_apis(&self) -> &[ApiSignature] {
        &self.logged_apis
    }

    pub fn library_prefixes(&self) -> &[String] {
        &self.library_prefixes
    }

    pub fn set_library_prefixes(&mut self, prefixes: Vec<String>) {
        self.library_prefixes = prefixes;
    }

    pub fn is_logged(&self, sig: &ApiSignature) -> bool {
        self.logged_set.contains(sig)
    }

    pub fn is_callback(&self, sig: &ApiSignature) -> bool {
        self.callback_set.contains(sig)
    }

    pub fn callback_set(&self) -> &HashSet<ApiSignature> {
        &self.callback_set
    }

    pub fn supergraph_for(&self, callback: &ApiSignature) -> Option<&Supergraph> {
        self.by_root.get(callback).map(|&i| &self.supergraphs[i])
    }

    pub fn supergraph_of_node(&self, id: NodeId) -> Option<&Supergraph> {
        self.node_home.get(&id).map(|&i| &self.supergraphs[i])
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.supergraph_of_node(id).and_then(|g| g.node(id))
    }

    pub fn node_count(&self) -> usize {
        self.supergraphs.iter().map(|g| g.nodes().len()).sum()
    }

    pub fn branch_node_count(&self) -> usize {
        self.supergraphs.iter().map(Supergraph::branch_node_count).sum()
    }

    /// True if `node` is a call whose API is in the logged set.
    pub fn is_logged_node(&self, node: &Node) -> bool {
        node.statement.api().is_some_and(|a| self.is_logged(a))
    }

    /// Locate a method's CFG, preferring the copy in `prefer`.
    pub fn find_method<'a>(
        &'a self,
        sig: &ApiSignature,
        prefer: Option<&'a Supergraph>,
    ) -> Option<(&'a Supergraph, &'a MethodCfg)> {
        if let Some(g) = prefer {
            if let Some(m) = g.method_cfg(sig) {
                return Some((g, m));
            }
        }
        self.supergraphs
            .iter()
            .find_map(|g| g.method_cfg(sig).map(|m| (g, m)))
    }

    /// Callback supergraphs whose root is declared in `unit`, in model order.
    pub fn callbacks_in_unit<'a>(&'a self, unit: &'a str) -> impl Iterator<Item = &'a Supergraph> {
        self.supergraphs
            .iter()
            .filter(move |g| g.root_callback.signature.declaring_unit() == unit)
    }

    pub fn max_node_id(&self) -> Option<NodeId> {
        self.node_home.keys().copied().max()
    }
}
