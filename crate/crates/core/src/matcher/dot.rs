//! Graphviz rendering of matched paths.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::MatchReport;
use crate::graph::{AppModel, NodeId};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Path nodes per thread; matched nodes filled gray, edges added at match
/// time dashed, segment joins dotted.
pub fn to_dot(model: &AppModel, report: &MatchReport) -> String {
    let mut out = String::from("digraph paths {\n  node [shape=box, fontname=\"monospace\"];\n");
    for t in &report.threads {
        let _ = writeln!(out, "  subgraph cluster_tid_{} {{\n    label=\"tid {}\";", t.tid, t.tid);
        let mut declared: BTreeSet<NodeId> = BTreeSet::new();
        for p in t.paths.iter().flatten() {
            let g = model.supergraph_for(&p.callback);
            let matched: BTreeSet<NodeId> = p.match_points.values().copied().collect();
            for &n in &p.nodes {
                if !declared.insert(n) {
                    continue;
                }
                let label = g
                    .and_then(|g| p.overlay.node(g, n))
                    .map_or_else(|| n.to_string(), |node| node.statement.display.clone());
                let style = if matched.contains(&n) {
                    ", style=filled, fillcolor=gray"
                } else {
                    ""
                };
                let _ = writeln!(out, "    n{n} [label=\"{n}: {}\"{style}];", escape(&label));
            }
            let added: BTreeSet<(NodeId, NodeId)> = p
                .overlay
                .added_edges()
                .iter()
                .map(|e| (e.from, e.to))
                .collect();
            let mut drawn = BTreeSet::new();
            for w in p.nodes.windows(2) {
                if !drawn.insert((w[0], w[1])) {
                    continue;
                }
                let style = if added.contains(&(w[0], w[1])) {
                    " [style=dashed]"
                } else {
                    ""
                };
                let _ = writeln!(out, "    n{} -> n{}{style};", w[0], w[1]);
            }
        }
        for (a, b) in &t.joins {
            let _ = writeln!(out, "    n{a} -> n{b} [style=dotted];");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
