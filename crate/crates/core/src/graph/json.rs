//! JSON interchange format for [`AppModel`].

use serde::{Deserialize, Serialize};

use super::{
    validate, AppModel, CalleeRef, Diagnostic, Edge, EdgeKind, ModelError, Node, NodeId,
    Statement, StatementKind, Supergraph,
};
use crate::signature::{ApiSignature, MethodId};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    callbacks: Vec<ApiSignature>,
    logged_apis: Vec<ApiSignature>,
    library_prefixes: Vec<String>,
    supergraphs: Vec<SupergraphFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupergraphFile {
    root: ApiSignature,
    nodes: Vec<NodeFile>,
    edges: Vec<(NodeId, NodeId, EdgeKind)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeId,
    method: ApiSignature,
    kind: KindFile,
    display: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    callee: Option<CalleeFile>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum KindFile {
    Plain,
    Branch,
    Call,
    Entry,
    Exit,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CalleeFile {
    App { sig: ApiSignature },
    Framework { sig: ApiSignature },
    Reflective { sig: ApiSignature },
    Icc { sig: ApiSignature },
}

/// Parse and validate a model.
pub fn load_app_model(bytes: &[u8]) -> Result<AppModel, ModelError> {
    let model = load_app_model_unchecked(bytes)?;
    let diags = validate(&model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Validation(diags))
    }
}

/// Parse a model without running [`validate`]. Statement-shape errors
/// (a `call` node without a callee and the like) are still reported.
pub fn load_app_model_unchecked(bytes: &[u8]) -> Result<AppModel, ModelError> {
    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut diags = Vec::new();
    let supergraphs = file
        .supergraphs
        .into_iter()
        .map(|sg| {
            let nodes = sg
                .nodes
                .into_iter()
                .filter_map(|n| match node_from_file(n) {
                    Ok(n) => Some(n),
                    Err(d) => {
                        diags.push(d);
                        None
                    }
                })
                .collect();
            let edges = sg
                .edges
                .into_iter()
                .map(|(from, to, kind)| Edge { from, to, kind })
                .collect();
            Supergraph::new(MethodId::app(sg.root), nodes, edges)
        })
        .collect();
    if !diags.is_empty() {
        return Err(ModelError::Validation(diags));
    }
    Ok(AppModel::new(
        supergraphs,
        file.callbacks,
        file.logged_apis,
        file.library_prefixes,
    ))
}

fn node_from_file(n: NodeFile) -> Result<Node, Diagnostic> {
    let kind = match (n.kind, n.callee) {
        (KindFile::Call, Some(c)) => StatementKind::Call(match c {
            CalleeFile::App { sig } => CalleeRef::Static(MethodId::app(sig)),
            CalleeFile::Framework { sig } => CalleeRef::Framework(sig),
            CalleeFile::Reflective { sig } => CalleeRef::Reflective { api: sig },
            CalleeFile::Icc { sig } => CalleeRef::Icc { api: sig },
        }),
        (KindFile::Call, None) => {
            return Err(Diagnostic::new(format!("node {} is a call without callee", n.id)))
        }
        (_, Some(_)) => {
            return Err(Diagnostic::new(format!(
                "node {} has a callee but is not a call",
                n.id
            )))
        }
        (KindFile::Plain, None) => StatementKind::Plain,
        (KindFile::Branch, None) => StatementKind::Branch {
            condition: n.display.clone(),
        },
        (KindFile::Entry, None) => StatementKind::Entry,
        (KindFile::Exit, None) => StatementKind::Exit,
    };
    Ok(Node {
        id: n.id,
        method: MethodId::app(n.method),
        statement: Statement {
            kind,
            display: n.display,
        },
    })
}

fn to_file(model: &AppModel) -> ModelFile {
    ModelFile {
        callbacks: model.callback_registry().to_vec(),
        logged_apis: model.logged_apis().to_vec(),
        library_prefixes: model.library_prefixes().to_vec(),
        supergraphs: model
            .supergraphs()
            .iter()
            .map(|g| SupergraphFile {
                root: g.root_callback.signature.clone(),
                nodes: g.nodes().iter().map(node_to_file).collect(),
                edges: g.edges().iter().map(|e| (e.from, e.to, e.kind)).collect(),
            })
            .collect(),
    }
}

fn node_to_file(n: &Node) -> NodeFile {
    let (kind, callee) = match &n.statement.kind {
        StatementKind::Plain => (KindFile::Plain, None),
        StatementKind::Branch { .. } => (KindFile::Branch, None),
        StatementKind::Entry => (KindFile::Entry, None),
        StatementKind::Exit => (KindFile::Exit, None),
        StatementKind::Call(c) => (
            KindFile::Call,
            Some(match c {
                CalleeRef::Static(m) => CalleeFile::App {
                    sig: m.signature.clone(),
                },
                CalleeRef::Framework(s) => CalleeFile::Framework { sig: s.clone() },
                CalleeRef::Reflective { api } => CalleeFile::Reflective { sig: api.clone() },
                CalleeRef::Icc { api } => CalleeFile::Icc { sig: api.clone() },
            }),
        ),
    };
    NodeFile {
        id: n.id,
        method: n.method.signature.clone(),
        kind,
        display: n.statement.display.clone(),
        callee,
    }
}

pub fn to_json(model: &AppModel) -> String {
    serde_json::to_string(&to_file(model)).expect("model serialization cannot fail")
}

pub fn to_json_pretty(model: &AppModel) -> String {
    serde_json::to_string_pretty(&to_file(model)).expect("model serialization cannot fail")
}
