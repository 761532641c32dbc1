//! Copy-on-write layer of nodes and edges added or removed at match time.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::{Edge, Node, NodeId, Supergraph};
use crate::signature::ApiSignature;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("node {0} is not in the supergraph or its overlay")]
    UnknownNode(NodeId),
    #[error("edge {0} is not a base edge")]
    NotBaseEdge(Edge),
}

/// Result of one memoized successor update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedRecord {
    /// Root of the inserted structure (explicit call node, embedded entry or
    /// icc target entry).
    pub root: NodeId,
    /// Successors of the call site relevant to this target, in visiting order.
    pub successors: Vec<NodeId>,
}

/// Mutable layer over one immutable [`Supergraph`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphOverlay {
    added_nodes: Vec<Node>,
    added_index: HashMap<NodeId, usize>,
    added_edges: Vec<Edge>,
    added_out: HashMap<NodeId, Vec<usize>>,
    removed_edges: BTreeSet<Edge>,
    embed_memo: BTreeMap<(NodeId, ApiSignature), EmbedRecord>,
    return_sites: HashMap<NodeId, NodeId>,
}

impl GraphOverlay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn added_nodes(&self) -> &[Node] {
        &self.added_nodes
    }

    pub fn added_edges(&self) -> &[Edge] {
        &self.added_edges
    }

    pub fn removed_edges(&self) -> &BTreeSet<Edge> {
        &self.removed_edges
    }

    pub fn is_empty(&self) -> bool {
        self.added_nodes.is_empty() && self.added_edges.is_empty() && self.removed_edges.is_empty()
    }

    pub fn node<'a>(&'a self, base: &'a Supergraph, id: NodeId) -> Option<&'a Node> {
        base.node(id)
            .or_else(|| self.added_index.get(&id).map(|&i| &self.added_nodes[i]))
    }

    pub fn contains(&self, base: &Supergraph, id: NodeId) -> bool {
        base.contains(id) || self.added_index.contains_key(&id)
    }

    pub fn memo(&self, site: NodeId, target: &ApiSignature) -> Option<&EmbedRecord> {
        self.embed_memo.get(&(site, target.clone()))
    }

    pub fn memo_entries(&self) -> impl Iterator<Item = (&(NodeId, ApiSignature), &EmbedRecord)> {
        self.embed_memo.iter()
    }

    pub(crate) fn insert_memo(&mut self, site: NodeId, target: ApiSignature, rec: EmbedRecord) {
        self.embed_memo.insert((site, target), rec);
    }

    /// Add a node; re-adding an existing id is a no-op.
    pub fn add_node(&mut self, node: Node) {
        if self.added_index.contains_key(&node.id) {
            return;
        }
        self.added_index.insert(node.id, self.added_nodes.len());
        self.added_nodes.push(node);
    }

    /// Add an edge whose source is in base or overlay. Duplicate edges are ignored.
    pub fn add_edge(&mut self, base: &Supergraph, edge: Edge) -> Result<(), LookupError> {
        if !self.contains(base, edge.from) {
            return Err(LookupError::UnknownNode(edge.from));
        }
        if base.out_edges(edge.from).any(|e| *e == edge) && !self.removed_edges.contains(&edge) {
            return Ok(());
        }
        if self
            .added_out
            .get(&edge.from)
            .is_some_and(|v| v.iter().any(|&i| self.added_edges[i] == edge))
        {
            return Ok(());
        }
        self.added_out
            .entry(edge.from)
            .or_default()
            .push(self.added_edges.len());
        self.added_edges.push(edge);
        Ok(())
    }

    pub fn remove_edge(&mut self, base: &Supergraph, edge: Edge) -> Result<(), LookupError> {
        if !base.out_edges(edge.from).any(|e| *e == edge) {
            return Err(LookupError::NotBaseEdge(edge));
        }
        self.removed_edges.insert(edge);
        Ok(())
    }

    /// Return site recorded for a call site whose base flow edge was replaced.
    pub fn return_site(&self, base: &Supergraph, call_site: NodeId) -> Option<NodeId> {
        self.return_sites
            .get(&call_site)
            .copied()
            .or_else(|| base.flow_successor(call_site))
            .or_else(|| {
                self.added_out.get(&call_site).and_then(|v| {
                    v.iter()
                        .map(|&i| self.added_edges[i])
                        .find(|e| e.kind == super::EdgeKind::Flow)
                        .map(|e| e.to)
                })
            })
    }

    pub(crate) fn set_return_site(&mut self, call_site: NodeId, target: NodeId) {
        self.return_sites.insert(call_site, target);
    }

    /// Outgoing edges of `id`: live base edges first, then overlay edges.
    pub fn out_edges(&self, base: &Supergraph, id: NodeId) -> Result<Vec<Edge>, LookupError> {
        if !self.contains(base, id) {
            return Err(LookupError::UnknownNode(id));
        }
        let mut v: Vec<Edge> = base
            .out_edges(id)
            .filter(|e| !self.removed_edges.contains(e))
            .copied()
            .collect();
        if let Some(idx) = self.added_out.get(&id) {
            v.extend(idx.iter().map(|&i| self.added_edges[i]));
        }
        Ok(v)
    }

    pub fn has_edge(&self, base: &Supergraph, from: NodeId, to: NodeId) -> Option<Edge> {
        self.out_edges(base, from)
            .ok()?
            .into_iter()
            .find(|e| e.to == to)
    }
}

/// Successors of `n` through (base edges minus removed) followed by added edges.
pub fn neighbors(
    g: &Supergraph,
    overlay: &GraphOverlay,
    n: NodeId,
) -> Result<Vec<NodeId>, LookupError> {
    Ok(overlay.out_edges(g, n)?.into_iter().map(|e| e.to).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeKind, Statement, StatementKind};
    use crate::signature::MethodId;

    fn node(id: NodeId, kind: StatementKind) -> Node {
        Node {
            id,
            method: MethodId::app("a.B.cb()V".parse().unwrap()),
            statement: Statement {
                kind,
                display: format!("n{id}"),
            },
        }
    }

    fn branchy() -> Supergraph {
        let nodes = vec![
            node(1, StatementKind::Entry),
            node(2, StatementKind::Branch {
                condition: "c".into(),
            }),
            node(3, StatementKind::Plain),
            node(4, StatementKind::Plain),
            node(5, StatementKind::Exit),
        ];
        let edges = vec![
            Edge::new(1, 2, EdgeKind::Flow),
            Edge::new(2, 3, EdgeKind::Flow),
            Edge::new(2, 4, EdgeKind::Flow),
            Edge::new(3, 5, EdgeKind::Flow),
            Edge::new(4, 5, EdgeKind::Flow),
        ];
        Supergraph::new(nodes[0].method.clone(), nodes, edges)
    }

    #[test]
    fn exit_without_return_is_sink() {
        let g = branchy();
        assert!(neighbors(&g, &GraphOverlay::new(), 5).unwrap().is_empty());
    }

    #[test]
    fn overlay_edges_follow_base_edges() {
        let g = branchy();
        let mut o = GraphOverlay::new();
        o.add_node(node(100, StatementKind::Plain));
        o.add_edge(&g, Edge::new(2, 100, EdgeKind::Flow)).unwrap();
        assert_eq!(neighbors(&g, &o, 2).unwrap(), vec![3, 4, 100]);
    }

    #[test]
    fn removed_base_edge_replaced_by_overlay_edge() {
        // hand enumeration: base out(3) = {3->5}; remove it, add 3->100 => [100]
        let g = branchy();
        let mut o = GraphOverlay::new();
        o.add_node(node(100, StatementKind::Plain));
        o.remove_edge(&g, Edge::new(3, 5, EdgeKind::Flow)).unwrap();
        o.add_edge(&g, Edge::new(3, 100, EdgeKind::Flow)).unwrap();
        assert_eq!(neighbors(&g, &o, 3).unwrap(), vec![100]);
        assert_eq!(g.edges().len(), 5);
    }

    #[test]
    fn unknown_node_lookup_fails() {
        let g = branchy();
        assert_eq!(
            neighbors(&g, &GraphOverlay::new(), 42),
            Err(LookupError::UnknownNode(42))
        );
    }

    #[test]
    fn removing_non_base_edge_fails() {
        let g = branchy();
        let mut o = GraphOverlay::new();
        assert!(o.remove_edge(&g, Edge::new(1, 5, EdgeKind::Flow)).is_err());
    }
}
