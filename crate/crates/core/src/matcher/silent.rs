//! Methods that can run from entry to exit without emitting a record.

use std::collections::{HashSet, VecDeque};

use crate::graph::{AppModel, CalleeRef, EdgeKind, MethodCfg, Supergraph};
use crate::signature::ApiSignature;

/// Least fixpoint of "has an Entry→Exit path whose nodes are unlogged and
/// whose static calls target silent methods". A signature is silent if any
/// of its copies is.
#[derive(Debug, Clone, Default)]
pub struct SilentMethods {
    silent: HashSet<ApiSignature>,
}

impl SilentMethods {
    pub fn compute(model: &AppModel) -> Self {
        Self::compute_with(model, &HashSet::new())
    }

    /// Like [`compute`](Self::compute) with extra APIs treated as logged.
    pub fn compute_with(model: &AppModel, extra_logged: &HashSet<ApiSignature>) -> Self {
        let mut silent: HashSet<ApiSignature> = HashSet::new();
        loop {
            let mut changed = false;
            for g in model.supergraphs() {
                for cfg in g.methods() {
                    let sig = &cfg.method.signature;
                    if silent.contains(sig) {
                        continue;
                    }
                    if passes_silently(model, g, cfg, &silent, extra_logged) {
                        silent.insert(sig.clone());
                        changed = true;
                    }
                }
            }
            if !changed {
                return Self { silent };
            }
        }
    }

    pub fn is_silent(&self, sig: &ApiSignature) -> bool {
        self.silent.contains(sig)
    }

    pub fn len(&self) -> usize {
        self.silent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.silent.is_empty()
    }
}

fn passes_silently(
    model: &AppModel,
    g: &Supergraph,
    cfg: &MethodCfg,
    silent: &HashSet<ApiSignature>,
    extra_logged: &HashSet<ApiSignature>,
) -> bool {
    let (Some(entry), Some(exit)) = (cfg.entry, cfg.exit) else {
        return false;
    };
    let mut seen: HashSet<u64> = HashSet::from([entry]);
    let mut queue = VecDeque::from([entry]);
    while let Some(id) = queue.pop_front() {
        if id == exit {
            return true;
        }
        let node = g.node(id).expect("cfg member");
        if let Some(api) = node.statement.api() {
            if model.is_logged(api) || extra_logged.contains(api) {
                continue;
            }
        }
        if let Some(CalleeRef::Static(callee)) = node.statement.callee() {
            if !silent.contains(&callee.signature) {
                continue;
            }
        }
        for e in g.out_edges(id) {
            if e.kind == EdgeKind::Flow && seen.insert(e.to) {
                queue.push_back(e.to);
            }
        }
    }
    false
}
