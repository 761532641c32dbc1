//! Depth-first path search shared by the guided matcher and the
//! signature-only baseline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use super::check::{decide, Decision};
use super::{
    update_successors, MatchConfig, MatchError, NoMatchReason, PathSegment, SilentMethods,
    Strategy,
};
use crate::graph::{
    AppModel, CalleeRef, EdgeKind, GraphOverlay, LookupError, NodeId, StatementKind, Supergraph,
};
use crate::log::{LogRecord, LogSegment, Special};
use crate::signature::ApiSignature;

const NIL: u32 = u32::MAX;

/// Match one segment with the strategy selected in `cfg`.
pub fn match_segment(
    model: &AppModel,
    seg: &LogSegment,
    cfg: &MatchConfig,
) -> Result<PathSegment, MatchError> {
    run(model, seg, cfg, &SilentMethods::compute(model))
}

/// Match one segment with the signature-only baseline.
pub fn match_segment_backtracking(
    model: &AppModel,
    seg: &LogSegment,
    cfg: &MatchConfig,
) -> Result<PathSegment, MatchError> {
    let cfg = MatchConfig {
        strategy: Strategy::Backtracking,
        ..cfg.clone()
    };
    match_segment(model, seg, &cfg)
}

/// Node visits of an unmemoized baseline search that enumerates every
/// satisfying path, stopping at `cap`.
pub fn exhaustive_visit_bound(model: &AppModel, seg: &LogSegment, cap: u64) -> u64 {
    let cfg = MatchConfig {
        strategy: Strategy::Backtracking,
        max_paths: usize::MAX,
        max_visits: cap,
        memoize: false,
        ..MatchConfig::default()
    };
    let silent = SilentMethods::default();
    let Ok(mut e) = Engine::new(model, seg, &cfg, &silent) else {
        return 0;
    };
    e.keep_alternatives = 0;
    let _ = e.search();
    (e.visits + e.probe_visits).min(cap)
}

pub(crate) fn run(
    model: &AppModel,
    seg: &LogSegment,
    cfg: &MatchConfig,
    silent: &SilentMethods,
) -> Result<PathSegment, MatchError> {
    let started = Instant::now();
    let mut e = Engine::new(model, seg, cfg, silent)?;
    let stop = e.search()?;
    let Some((nodes, flags)) = e.first.take() else {
        return Err(MatchError::NoMatch {
            deepest_index: e.deepest,
            reason: stop.unwrap_or(NoMatchReason::Exhausted),
        });
    };
    let mut overlay = GraphOverlay::new();
    let mut match_points = BTreeMap::new();
    let mut match_positions = Vec::new();
    let mut pos = 0usize;
    for (k, (&n, &m)) in nodes.iter().zip(&flags).enumerate() {
        if !m {
            continue;
        }
        match_points.insert(pos, n);
        match_positions.push(k);
        let r = e.records[pos];
        if pos > 0 {
            let node = overlay
                .node(e.g, n)
                .cloned()
                .ok_or(LookupError::UnknownNode(n))?;
            let fits = matches!(
                (node.statement.callee(), &r.des.special),
                (Some(CalleeRef::Reflective { .. }), Special::Reflective { .. })
                    | (Some(CalleeRef::Icc { .. }), Special::Icc { .. })
            );
            if fits {
                update_successors(&mut overlay, e.g, &node, &r.des, model)?;
            }
        }
        pos += 1;
    }
    Ok(PathSegment {
        callback: seg.callback.des.signature.clone(),
        callback_seq: seg.callback.seq,
        nodes,
        match_points,
        match_positions,
        overlay,
        visited_count: e.visits,
        probe_visits: e.probe_visits,
        ambiguous: e.solutions >= 2,
        solutions_found: e.solutions,
        alternatives: std::mem::take(&mut e.alternatives),
        elapsed: started.elapsed(),
    })
}

struct StackEntry {
    parent: u32,
    method: u32,
    ret: Option<NodeId>,
    len: u32,
}

/// Hash-consed emulated stacks; equal stacks share one id.
#[derive(Default)]
struct Stacks {
    entries: Vec<StackEntry>,
    index: HashMap<(u32, u32, Option<NodeId>), u32>,
}

impl Stacks {
    fn push(&mut self, parent: u32, method: u32, ret: Option<NodeId>) -> u32 {
        if let Some(&id) = self.index.get(&(parent, method, ret)) {
            return id;
        }
        let len = if parent == NIL {
            1
        } else {
            self.entries[parent as usize].len + 1
        };
        let id = self.entries.len() as u32;
        self.entries.push(StackEntry {
            parent,
            method,
            ret,
            len,
        });
        self.index.insert((parent, method, ret), id);
        id
    }

    fn get(&self, id: u32) -> &StackEntry {
        &self.entries[id as usize]
    }

    fn len(&self, id: u32) -> usize {
        self.get(id).len as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StateKey {
    node: NodeId,
    index: u32,
    stack: u32,
    last_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Entry,
    Exit,
    StaticCall,
    Reflective,
    Other,
}

#[derive(Debug, Clone, Copy)]
struct Info {
    kind: Kind,
    api: u32,
    loggable: bool,
    method: u32,
    silent: bool,
}

enum Step {
    Pruned,
    Budget(NoMatchReason),
    Solution,
    Descend {
        matched: bool,
        index: u32,
        last: u32,
        succ: Vec<(NodeId, u32)>,
    },
}

struct Frame {
    key: StateKey,
    matched: bool,
    index: u32,
    last: u32,
    succ: Vec<(NodeId, u32)>,
    next: usize,
    low: usize,
    success: bool,
}

struct Engine<'a> {
    model: &'a AppModel,
    g: &'a Supergraph,
    records: Vec<&'a LogRecord>,
    cfg: &'a MatchConfig,
    silent: &'a SilentMethods,
    guided: bool,
    loggable: HashSet<ApiSignature>,
    names: HashMap<ApiSignature, u32>,
    rec_sig: Vec<u32>,
    windows: Vec<Vec<u32>>,
    stacks: Stacks,
    info: HashMap<NodeId, Info>,
    overlay: GraphOverlay,
    memo: HashMap<StateKey, bool>,
    visits: u64,
    probe_visits: u64,
    unguided: Vec<u64>,
    deepest: usize,
    solutions: usize,
    first: Option<(Vec<NodeId>, Vec<bool>)>,
    alternatives: Vec<Vec<NodeId>>,
    keep_alternatives: usize,
}

fn intern(names: &mut HashMap<ApiSignature, u32>, sig: &ApiSignature) -> u32 {
    if let Some(&id) = names.get(sig) {
        return id;
    }
    let id = names.len() as u32;
    names.insert(sig.clone(), id);
    id
}

impl<'a> Engine<'a> {
    fn new(
        model: &'a AppModel,
        seg: &'a LogSegment,
        cfg: &'a MatchConfig,
        silent: &'a SilentMethods,
    ) -> Result<Self, MatchError> {
        let cb = &seg.callback.des.signature;
        let g = model
            .supergraph_for(cb)
            .ok_or_else(|| MatchError::MissingSupergraph(cb.clone()))?;
        let records: Vec<&LogRecord> = seg.records().collect();
        let mut loggable: HashSet<ApiSignature> = model.logged_apis().iter().cloned().collect();
        loggable.extend(seg.body.iter().map(|r| r.des.signature.clone()));
        let mut names = HashMap::new();
        let rec_sig = records
            .iter()
            .map(|r| intern(&mut names, &r.des.signature))
            .collect();
        let windows = records
            .iter()
            .map(|r| r.csi.p.iter().map(|s| intern(&mut names, s)).collect())
            .collect();
        Ok(Self {
            model,
            g,
            cfg,
            silent,
            guided: cfg.strategy == Strategy::Guided,
            loggable,
            names,
            rec_sig,
            windows,
            stacks: Stacks::default(),
            info: HashMap::new(),
            overlay: GraphOverlay::new(),
            memo: HashMap::new(),
            visits: 0,
            probe_visits: 0,
            unguided: vec![0; records.len()],
            deepest: 0,
            solutions: 0,
            first: None,
            alternatives: Vec::new(),
            keep_alternatives: cfg.max_paths.saturating_sub(1).min(1024),
            records,
        })
    }

    fn info(&mut self, id: NodeId) -> Result<Info, MatchError> {
        if let Some(i) = self.info.get(&id) {
            return Ok(*i);
        }
        let node = self
            .overlay
            .node(self.g, id)
            .ok_or(LookupError::UnknownNode(id))?;
        let kind = match &node.statement.kind {
            StatementKind::Entry => Kind::Entry,
            StatementKind::Exit => Kind::Exit,
            StatementKind::Call(CalleeRef::Static(_)) => Kind::StaticCall,
            StatementKind::Call(CalleeRef::Reflective { .. }) => Kind::Reflective,
            _ => Kind::Other,
        };
        let api = node.statement.api().cloned();
        let loggable = api.as_ref().is_some_and(|a| self.loggable.contains(a));
        let silent = self.silent.is_silent(&node.method.signature);
        let method_sig = node.method.signature.clone();
        let info = Info {
            kind,
            api: api.map_or(NIL, |a| intern(&mut self.names, &a)),
            loggable,
            method: intern(&mut self.names, &method_sig),
            silent,
        };
        self.info.insert(id, info);
        Ok(info)
    }

    /// Frames at depth `>= target - |w|` of stack `s` line up with `w`.
    fn aligned(&self, s: u32, w: &[u32], target: usize) -> bool {
        let len = self.stacks.len(s);
        let start = target.saturating_sub(w.len());
        if len <= start {
            return true;
        }
        if len - start > w.len() {
            return false;
        }
        let mut cur = s;
        for j in (start..len).rev() {
            let e = self.stacks.get(cur);
            if e.method != w[j - start] {
                return false;
            }
            cur = e.parent;
        }
        true
    }

    fn probe_mode(&self) -> bool {
        self.cfg.max_paths == 2
    }

    fn search(&mut self) -> Result<Option<NoMatchReason>, MatchError> {
        let entry = self.g.entry().ok_or_else(|| {
            MatchError::Contract(format!("supergraph {} has no entry", self.g.root_callback))
        })?;
        let root = self.info(entry)?;
        let s0 = self.stacks.push(NIL, root.method, None);
        self.visits = 1;
        if self.records.len() == 1 {
            self.solutions = 1;
            self.first = Some((vec![entry], vec![true]));
            return Ok(None);
        }
        let succ = self.successors(entry, root, s0, Some(0))?;
        let root_key = StateKey {
            node: entry,
            index: 0,
            stack: s0,
            last_len: 0,
        };
        let mut frames = vec![Frame {
            key: root_key,
            matched: true,
            index: 1,
            last: 1,
            succ,
            next: 0,
            low: usize::MAX,
            success: false,
        }];
        let mut on_path: HashMap<StateKey, usize> = HashMap::from([(root_key, 0)]);
        loop {
            let Some(top) = frames.last_mut() else {
                return Ok(None);
            };
            if top.next >= top.succ.len() {
                let f = frames.pop().expect("non-empty");
                on_path.remove(&f.key);
                let depth = frames.len();
                if self.cfg.memoize {
                    if f.success {
                        self.memo.insert(f.key, true);
                    } else if f.low >= depth {
                        self.memo.insert(f.key, false);
                    }
                }
                if let Some(p) = frames.last_mut() {
                    p.low = p.low.min(f.low);
                    p.success |= f.success;
                }
                continue;
            }
            let (v, s) = top.succ[top.next];
            top.next += 1;
            let (index, last) = (top.index, top.last);
            let key = StateKey {
                node: v,
                index,
                stack: s,
                last_len: if self.guided { last } else { 0 },
            };
            if let Some(&d) = on_path.get(&key) {
                top.low = top.low.min(d);
                continue;
            }
            match self.memo.get(&key) {
                Some(false) => continue,
                Some(true) if self.probe_mode() => {
                    self.solutions += 1;
                    top.success = true;
                    if self.solutions >= self.cfg.max_paths {
                        return Ok(None);
                    }
                    continue;
                }
                _ => {}
            }
            match self.enter(v, s, index, last)? {
                Step::Pruned => {}
                Step::Budget(reason) => return Ok(Some(reason)),
                Step::Solution => {
                    top.success = true;
                    self.solutions += 1;
                    let mut nodes: Vec<NodeId> = frames.iter().map(|f| f.key.node).collect();
                    nodes.push(v);
                    if self.first.is_none() {
                        let mut flags: Vec<bool> = frames.iter().map(|f| f.matched).collect();
                        flags.push(true);
                        self.first = Some((nodes, flags));
                    } else if self.alternatives.len() < self.keep_alternatives {
                        self.alternatives.push(nodes);
                    }
                    if self.solutions >= self.cfg.max_paths {
                        return Ok(None);
                    }
                }
                Step::Descend {
                    matched,
                    index,
                    last,
                    succ,
                } => {
                    on_path.insert(key, frames.len());
                    frames.push(Frame {
                        key,
                        matched,
                        index,
                        last,
                        succ,
                        next: 0,
                        low: usize::MAX,
                        success: false,
                    });
                }
            }
        }
    }

    fn enter(&mut self, v: NodeId, s: u32, index: u32, last: u32) -> Result<Step, MatchError> {
        let info = self.info(v)?;
        let len = self.stacks.len(s);
        if len > self.cfg.max_depth {
            return Ok(Step::Pruned);
        }
        let i = index as usize;
        let mut decision = None;
        let mut dis = 0i64;
        if self.guided {
            let delta = i64::from(self.records[i].csi.d) - i64::from(self.records[i - 1].csi.d);
            let target = i64::from(last) + delta;
            dis = target - len as i64;
            let w = &self.windows[i];
            decision = Some(decide(dis, w.len(), || {
                target >= 0 && self.aligned(s, w, target as usize)
            }));
        }
        let mut matched = false;
        if info.loggable {
            if info.api != self.rec_sig[i] {
                return Ok(Step::Pruned);
            }
            if self.guided && !(dis == 0 && self.aligned(s, &self.windows[i], len)) {
                return Ok(Step::Pruned);
            }
            matched = true;
        } else if decision == Some(Decision::Backtrack)
            && info.kind == Kind::Entry
            && len > 1
            && !info.silent
        {
            return Ok(Step::Pruned);
        }
        if decision == Some(Decision::ForwardUnguided) {
            self.unguided[i] += 1;
            if self.unguided[i] > self.cfg.max_unguided_per_record {
                return Ok(Step::Budget(NoMatchReason::UnguidedBudget));
            }
        }
        if self.solutions == 0 {
            self.visits += 1;
        } else {
            self.probe_visits += 1;
        }
        if self.visits + self.probe_visits > self.cfg.max_visits {
            return Ok(Step::Budget(NoMatchReason::VisitBudget));
        }
        if !matched {
            let succ = self.successors(v, info, s, None)?;
            return Ok(Step::Descend {
                matched,
                index,
                last,
                succ,
            });
        }
        self.deepest = self.deepest.max(i);
        if i + 1 == self.records.len() {
            return Ok(Step::Solution);
        }
        let succ = self.successors(v, info, s, Some(i))?;
        Ok(Step::Descend {
            matched,
            index: index + 1,
            last: len as u32,
            succ,
        })
    }

    fn flow(&self, v: NodeId, s: u32) -> Result<Vec<(NodeId, u32)>, MatchError> {
        Ok(self
            .overlay
            .out_edges(self.g, v)?
            .into_iter()
            .filter(|e| e.kind == EdgeKind::Flow)
            .map(|e| (e.to, s))
            .collect())
    }

    fn successors(
        &mut self,
        v: NodeId,
        info: Info,
        s: u32,
        matched: Option<usize>,
    ) -> Result<Vec<(NodeId, u32)>, MatchError> {
        let mut out = match info.kind {
            Kind::Exit => {
                let e = self.stacks.get(s);
                match (e.parent, e.ret) {
                    (NIL, _) | (_, None) => Vec::new(),
                    (parent, Some(ret)) => vec![(ret, parent)],
                }
            }
            Kind::StaticCall => {
                let callees: Vec<NodeId> = self
                    .overlay
                    .out_edges(self.g, v)?
                    .into_iter()
                    .filter(|e| e.kind == EdgeKind::CallEnter)
                    .map(|e| e.to)
                    .collect();
                if callees.is_empty() {
                    self.flow(v, s)?
                } else {
                    let ret = self.overlay.return_site(self.g, v);
                    let mut out = Vec::with_capacity(callees.len());
                    for t in callees {
                        let m = self.info(t)?.method;
                        out.push((t, self.stacks.push(s, m, ret)));
                    }
                    out
                }
            }
            Kind::Reflective => {
                let rec = matched
                    .map(|i| self.records[i])
                    .filter(|r| matches!(r.des.special, Special::Reflective { .. }));
                match rec {
                    Some(r) => {
                        let node = self
                            .overlay
                            .node(self.g, v)
                            .cloned()
                            .ok_or(LookupError::UnknownNode(v))?;
                        let ids =
                            update_successors(&mut self.overlay, self.g, &node, &r.des, self.model)?;
                        let ret = self.overlay.return_site(self.g, v);
                        let mut out = Vec::with_capacity(ids.len());
                        for id in ids {
                            let t = self.info(id)?;
                            if t.kind == Kind::Entry {
                                out.push((id, self.stacks.push(s, t.method, ret)));
                            } else {
                                out.push((id, s));
                            }
                        }
                        out
                    }
                    None => self
                        .overlay
                        .return_site(self.g, v)
                        .map(|r| vec![(r, s)])
                        .unwrap_or_default(),
                }
            }
            Kind::Entry | Kind::Other => self.flow(v, s)?,
        };
        let mut seen = HashSet::new();
        out.retain(|x| seen.insert(*x));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::LogSegment;
    use crate::matcher::verify_walk;
    use crate::sim::builder::ModelBuilder;
    use crate::sim::fixtures::{callback_record, motivating_example, record, Fixture};

    const CB: &str = "com.t.Main.onResume()V";
    const A: &str = "android.t.Api.a()V";
    const C: &str = "android.t.Api.c()V";

    fn segment_of(f: &Fixture) -> LogSegment {
        LogSegment {
            callback: f.log.records[0].clone(),
            body: f.log.records[1..].to_vec(),
        }
    }

    /// Every interprocedural walk from the entry (up to `max_len` nodes)
    /// ending at a logged node whose logged-node projection verifies.
    fn brute_force(f: &Fixture, max_len: usize) -> Vec<Vec<NodeId>> {
        let seg = segment_of(f);
        let g = &f.model.supergraphs()[0];
        let overlay = GraphOverlay::new();
        let mut found = Vec::new();
        let mut work = vec![(vec![g.entry().unwrap()], Vec::<NodeId>::new())];
        while let Some((walk, rets)) = work.pop() {
            let last = *walk.last().unwrap();
            let positions: Vec<usize> = std::iter::once(0)
                .chain((1..walk.len()).filter(|&i| f.model.is_logged_node(g.node(walk[i]).unwrap())))
                .collect();
            if positions.len() == seg.len() && *positions.last().unwrap() == walk.len() - 1 {
                if verify_walk(&f.model, &seg, f.log.k, &walk, &positions).is_ok() {
                    found.push(walk.clone());
                }
                continue;
            }
            if walk.len() >= max_len || positions.len() > seg.len() {
                continue;
            }
            for e in overlay.out_edges(g, last).unwrap() {
                let mut rets = rets.clone();
                let is_call = matches!(g.node(last).unwrap().statement.callee(), Some(CalleeRef::Static(_)));
                match e.kind {
                    EdgeKind::Flow if is_call => continue,
                    EdgeKind::Flow => {}
                    EdgeKind::CallEnter => rets.push(g.flow_successor(last).unwrap()),
                    EdgeKind::Return => {
                        if rets.pop() != Some(e.to) {
                            continue;
                        }
                    }
                }
                let mut w = walk.clone();
                w.push(e.to);
                work.push((w, rets));
            }
        }
        found
    }

    #[test]
    fn empty_body_is_entry_only() {
        let f = motivating_example();
        let seg = LogSegment {
            callback: f.log.records[0].clone(),
            body: Vec::new(),
        };
        let p = match_segment(&f.model, &seg, &MatchConfig::default()).unwrap();
        assert_eq!(p.nodes, vec![f.ids[0]]);
        assert_eq!(p.match_points.len(), 1);
    }

    #[test]
    fn straight_line() {
        let mut mb = ModelBuilder::new();
        mb.logged(A).logged(C);
        let mut g = mb.supergraph(CB);
        let e = g.entry(CB);
        let a = g.call_framework(CB, A, "a()");
        let b = g.plain(CB, "b");
        let c = g.call_framework(CB, C, "c()");
        let x = g.exit(CB);
        g.chain(&[e, a, b, c, x]);
        g.finish();
        let model = mb.build();
        let seg = LogSegment {
            callback: callback_record(1, CB),
            body: vec![record(2, A, &[CB], 11), record(3, C, &[CB], 11)],
        };
        for strategy in [Strategy::Guided, Strategy::Backtracking] {
            let p = match_segment(&model, &seg, &MatchConfig::with_strategy(strategy)).unwrap();
            assert_eq!(p.nodes, vec![e, a, b, c]);
            assert_eq!(p.match_points, BTreeMap::from([(0, e), (1, a), (2, c)]));
            assert!(!p.ambiguous);
        }
    }

    #[test]
    fn motivating_example_has_one_walk_and_both_strategies_find_it() {
        let f = motivating_example();
        let walks = brute_force(&f, 30);
        assert_eq!(walks.len(), 1, "{walks:?}");
        let seg = segment_of(&f);
        for strategy in [Strategy::Guided, Strategy::Backtracking] {
            let p = match_segment(&f.model, &seg, &MatchConfig::with_strategy(strategy)).unwrap();
            assert_eq!(p.nodes, walks[0]);
            assert!(!p.ambiguous);
            let matched: Vec<NodeId> = p.match_points.values().skip(1).copied().collect();
            assert_eq!(matched, f.logged_nodes);
        }
    }

    #[test]
    fn unknown_callback_is_reported() {
        let f = motivating_example();
        let seg = LogSegment {
            callback: callback_record(1, "com.other.X.onStart()V"),
            body: Vec::new(),
        };
        assert!(matches!(
            match_segment(&f.model, &seg, &MatchConfig::default()),
            Err(MatchError::MissingSupergraph(_))
        ));
    }

    #[test]
    fn record_without_node_gives_no_match_with_depth() {
        let f = motivating_example();
        let mut seg = segment_of(&f);
        seg.body.truncate(2);
        seg.body.push(record(9, C, &[crate::sim::fixtures::MAIN_ON_CREATE], 11));
        match match_segment(&f.model, &seg, &MatchConfig::default()) {
            Err(MatchError::NoMatch { deepest_index, reason }) => {
                assert_eq!(deepest_index, 2);
                assert_eq!(reason, NoMatchReason::Exhausted);
            }
            other => panic!("{other:?}"),
        }
    }
}
