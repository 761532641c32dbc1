//! Seeded corpus shared by the acceptance and property targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackmatch::graph::{AppModel, CalleeRef, EdgeKind, NodeId, StatementKind, Supergraph};
use stackmatch::log::LogSequence;
use stackmatch::signature::ApiSignature;
use stackmatch::sim::gen::{generate_app, GenParams};
use stackmatch::sim::{simulate_with, GroundTruth, Scenario};

/// Window size used for the corpus; above any chain the simulator builds.
pub const CORPUS_K: usize = 64;

pub struct Instance {
    pub index: usize,
    pub params: GenParams,
    pub model: AppModel,
    pub log: LogSequence,
    pub truth: GroundTruth,
}

/// Generator settings of corpus instance `i`: 500 to 3000 nodes, branch
/// fraction 0.1 to 0.5, logged density 0.1, reflective fraction 0 to 0.9.
pub fn corpus_params(i: usize) -> GenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0_0000 + i as u64);
    GenParams {
        node_budget: rng.gen_range(500..=3000),
        branch_fraction: rng.gen_range(0.1..=0.5),
        logged_density: 0.1,
        reflective_fraction: rng.gen_range(0.0..=0.9),
        icc_links: rng.gen_range(0..=2),
        max_call_depth: 4,
        callbacks: rng.gen_range(2..=4),
        seed: i as u64,
    }
}

/// Instance `i`. A seed whose model misses the requested shape is
/// replaced by the next seed with the same knobs.
pub fn instance(i: usize) -> Instance {
    let mut params = corpus_params(i);
    let model = loop {
        match generate_app(&params) {
            Ok(m) => break m,
            Err(_) => params.seed += 1_000_000,
        }
    };
    let sc = Scenario {
        seed: i as u64,
        k: CORPUS_K,
        threads: 1 + i % 2,
        ..Scenario::default()
    };
    let (log, truth) = simulate_with(&model, &sc).expect("generated models are valid");
    Instance {
        index: i,
        params,
        model,
        log,
        truth,
    }
}

/// Logged signatures that can be the first record on a path from `start`.
fn first_logged(model: &AppModel, g: &Supergraph, start: NodeId, out: &mut Vec<ApiSignature>) {
    let mut stack = vec![start];
    let mut seen = std::collections::HashSet::new();
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        let Some(n) = g.node(v) else { continue };
        if let Some(api) = n.statement.api().filter(|a| model.is_logged(a)) {
            if !out.contains(api) {
                out.push(api.clone());
            }
            continue;
        }
        let static_call = matches!(n.statement.callee(), Some(CalleeRef::Static(_)));
        for e in g.out_edges(v) {
            let follow = match e.kind {
                EdgeKind::CallEnter => static_call,
                EdgeKind::Flow => !static_call,
                EdgeKind::Return => false,
            };
            if follow {
                stack.push(e.to);
            }
        }
    }
}

/// Whether some branch has two arms whose first logged call can have the same signature.
pub fn has_signature_identical_arms(model: &AppModel) -> bool {
    model.supergraphs().iter().any(|g| {
        g.nodes().iter().any(|n| {
            if !matches!(n.statement.kind, StatementKind::Branch { .. }) {
                return false;
            }
            let arms: Vec<Vec<ApiSignature>> = g
                .out_edges(n.id)
                .filter(|e| e.kind == EdgeKind::Flow)
                .map(|e| {
                    let mut v = Vec::new();
                    first_logged(model, g, e.to, &mut v);
                    v
                })
                .collect();
            arms.iter()
                .enumerate()
                .any(|(i, a)| arms[i + 1..].iter().any(|b| a.iter().any(|s| b.contains(s))))
        })
    })
}
