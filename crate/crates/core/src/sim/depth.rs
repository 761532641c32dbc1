//! Call-depth coverage of logged call sites and the choice of window size.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AppModel, CalleeRef};
use crate::signature::ApiSignature;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("empty table")]
    Empty,
    #[error("tables cover different k ranges ({0} vs {1})")]
    RangeMismatch(String, String),
    #[error("overhead at k = {0} is not positive")]
    NonPositive(usize),
    #[error("overhead table: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub k: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadPoint {
    pub k: usize,
    pub overhead: f64,
}

/// Shortest callback-to-caller chain length of every call site of a
/// `logged` API that the static callgraph reaches. The callback itself
/// has depth 1.
pub fn call_site_depths(model: &AppModel, logged: &HashSet<ApiSignature>) -> Vec<usize> {
    let mut out = Vec::new();
    for g in model.supergraphs() {
        let mut depth: HashMap<&ApiSignature, usize> = HashMap::new();
        let root = &g.root_callback.signature;
        depth.insert(root, 1);
        let mut queue = VecDeque::from([root]);
        while let Some(m) = queue.pop_front() {
            let d = depth[m];
            let Some(cfg) = g.method_cfg(m) else { continue };
            for &id in &cfg.nodes {
                let node = g.node(id).expect("cfg member");
                match node.statement.callee() {
                    Some(CalleeRef::Static(callee)) => {
                        if !depth.contains_key(&callee.signature) {
                            depth.insert(&callee.signature, d + 1);
                            queue.push_back(&callee.signature);
                        }
                    }
                    Some(c) => {
                        if c.api().is_some_and(|a| logged.contains(a)) {
                            out.push(d);
                        }
                    }
                    None => {}
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Coverage for k = 1..=max depth: share of call sites with depth ≤ k.
pub fn cdf_of(depths: &[usize]) -> Vec<CoveragePoint> {
    let Some(&max) = depths.iter().max() else {
        return Vec::new();
    };
    let mut counts = BTreeMap::new();
    for &d in depths {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let total = depths.len() as f64;
    let mut acc = 0usize;
    (1..=max)
        .map(|k| {
            acc += counts.get(&k).copied().unwrap_or(0);
            CoveragePoint {
                k,
                coverage: acc as f64 / total,
            }
        })
        .collect()
}

pub fn depth_cdf(model: &AppModel, logged: &HashSet<ApiSignature>) -> Vec<CoveragePoint> {
    cdf_of(&call_site_depths(model, logged))
}

/// Pad `cdf` with its final coverage up to `k_max`.
pub fn extend_cdf(cdf: &[CoveragePoint], k_max: usize) -> Vec<CoveragePoint> {
    let mut out = cdf.to_vec();
    let last = out.last().map_or(0.0, |p| p.coverage);
    for k in out.len() + 1..=k_max {
        out.push(CoveragePoint { k, coverage: last });
    }
    out
}

/// Linear interpolation between `anchors` (sorted by k) for every k in `1..=k_max`.
pub fn interpolate_overhead(anchors: &[OverheadPoint], k_max: usize) -> Vec<OverheadPoint> {
    (1..=k_max)
        .map(|k| {
            let overhead = match anchors.iter().position(|a| a.k >= k) {
                None => anchors.last().map_or(0.0, |a| a.overhead),
                Some(0) => anchors[0].overhead,
                Some(i) => {
                    let (a, b) = (anchors[i - 1], anchors[i]);
                    let t = (k - a.k) as f64 / (b.k - a.k) as f64;
                    a.overhead + t * (b.overhead - a.overhead)
                }
            };
            OverheadPoint { k, overhead }
        })
        .collect()
}

/// The k maximizing coverage / overhead; ties go to the smaller k.
pub fn select_k(cdf: &[CoveragePoint], overhead: &[OverheadPoint]) -> Result<usize, DepthError> {
    if cdf.is_empty() || overhead.is_empty() {
        return Err(DepthError::Empty);
    }
    let ks = |v: &mut dyn Iterator<Item = usize>| v.collect::<Vec<_>>();
    let a = ks(&mut cdf.iter().map(|p| p.k));
    let b = ks(&mut overhead.iter().map(|p| p.k));
    if a != b {
        let range = |v: &[usize]| format!("{}..={}", v[0], v[v.len() - 1]);
        return Err(DepthError::RangeMismatch(range(&a), range(&b)));
    }
    let mut best: Option<(usize, f64)> = None;
    for (c, o) in cdf.iter().zip(overhead) {
        if o.overhead <= 0.0 {
            return Err(DepthError::NonPositive(o.k));
        }
        let r = c.coverage / o.overhead;
        if best.map_or(true, |(_, br)| r > br) {
            best = Some((c.k, r));
        }
    }
    Ok(best.expect("non-empty").0)
}

pub fn read_overhead_csv<R: io::Read>(r: R) -> Result<Vec<OverheadPoint>, DepthError> {
    let mut rows: Vec<OverheadPoint> = csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|p| p.k);
    if rows.is_empty() {
        return Err(DepthError::Empty);
    }
    Ok(rows)
}

pub fn write_cdf_csv<W: io::Write>(w: W, cdf: &[CoveragePoint]) -> Result<(), DepthError> {
    let mut out = csv::Writer::from_writer(w);
    for p in cdf {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}
