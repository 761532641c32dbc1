//! Seeded execution of a model that emits a log and the walk behind it.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fixtures::{GET_DEVICE_ID, SEND_TEXT};
use crate::graph::{validate, AppModel, CalleeRef, EdgeKind, NodeId, StatementKind, Supergraph};
use crate::log::{CallStackInfo, Des, LogRecord, LogSegment, LogSequence, Special};
use crate::matcher::synthetic_id;
use crate::signature::ApiSignature;

/// Framework targets a reflective site may resolve to when no app method is chosen.
pub const FRAMEWORK_TARGETS: &[&str] = &[SEND_TEXT, GET_DEVICE_ID, "java.lang.String.length()I"];

const LIBRARY_FRAMES: &[&str] = &[
    "android.os.Looper.loop()V",
    "android.os.Handler.dispatchMessage(Landroid/os/Message;)V",
    "android.view.Choreographer.doFrame(J)V",
];
const LIBRARY_APIS: &[&str] = &[
    "android.os.Handler.dispatchMessage(Landroid/os/Message;)V",
    "android.os.MessageQueue.next()Landroid/os/Message;",
    "java.lang.Thread.run()V",
];
const FOREIGN_FRAME: &str = "com.other.app.Worker.run()V";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub k: usize,
    pub threads: usize,
    /// Callback invocations per thread, not counting ICC-started ones.
    pub events: usize,
    /// Share of a thread's in-scope records that come from library code.
    pub noise: f64,
    /// Share of the final log produced by another process.
    pub foreign: f64,
    pub base_offset: u32,
    pub pid: u32,
    /// Deepest app chain a reflective dispatch may extend.
    pub max_chain: usize,
    /// Chance that a reflective site resolves to an app method when one is eligible.
    pub app_target_probability: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 11,
            threads: 1,
            events: 3,
            noise: 0.5,
            foreign: 0.0,
            base_offset: 7,
            pid: 1000,
            max_chain: 32,
            app_target_probability: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    App,
    Library,
    Foreign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub seq: u64,
    pub pid: u32,
    pub tid: u32,
    pub tag: Tag,
    /// App frames on the emulated stack; 0 for records outside the app.
    pub chain_len: usize,
    pub window: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub callback: String,
    pub callback_seq: u64,
    /// Every node executed, entry to exit.
    pub walk: Vec<NodeId>,
    /// The walk cut after the node of the last record.
    pub node_sequence: Vec<NodeId>,
    /// Index into `node_sequence` of each record's node, callback first.
    pub match_positions: Vec<usize>,
    pub record_seqs: Vec<u64>,
}

impl SegmentTruth {
    /// The records of this segment, looked up by seq in `log`.
    pub fn log_segment(&self, log: &LogSequence) -> Option<LogSegment> {
        let by_seq = |q: &u64| log.records.binary_search_by_key(q, |r| r.seq).ok().map(|i| log.records[i].clone());
        let mut recs = self.record_seqs.iter().map(by_seq).collect::<Option<Vec<_>>>()?.into_iter();
        Some(LogSegment {
            callback: recs.next()?,
            body: recs.collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadTruth {
    pub tid: u32,
    pub segments: Vec<SegmentTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base_offset: u32,
    pub k: usize,
    pub pid: u32,
    pub records: Vec<RecordTruth>,
    pub threads: Vec<ThreadTruth>,
}

impl GroundTruth {
    pub fn segments(&self) -> impl Iterator<Item = &SegmentTruth> {
        self.threads.iter().flat_map(|t| &t.segments)
    }

    pub fn library_seqs(&self) -> BTreeSet<u64> {
        self.records
            .iter()
            .filter(|r| r.tag == Tag::Library)
            .map(|r| r.seq)
            .collect()
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.records.iter().filter(|r| r.tag == tag).count()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Simulate with default scenario settings apart from seed, window and threads.
pub fn simulate(
    model: &AppModel,
    seed: u64,
    k: usize,
    threads: usize,
) -> Result<(LogSequence, GroundTruth), SimError> {
    simulate_with(
        model,
        &Scenario {
            seed,
            k,
            threads,
            ..Scenario::default()
        },
    )
}

pub fn simulate_with(model: &AppModel, sc: &Scenario) -> Result<(LogSequence, GroundTruth), SimError> {
    if sc.k == 0 {
        return Err(SimError::Contract("k must be at least 1".into()));
    }
    if sc.threads == 0 {
        return Err(SimError::Contract("threads must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&sc.noise) || !(0.0..1.0).contains(&sc.foreign) {
        return Err(SimError::Contract("noise and foreign shares must be in [0, 1)".into()));
    }
    if !(0.0..=1.0).contains(&sc.app_target_probability) {
        return Err(SimError::Contract("app_target_probability must be in [0, 1]".into()));
    }
    let diags = validate(model);
    if let Some(d) = diags.first() {
        return Err(SimError::Contract(format!("invalid model: {d}")));
    }
    let callbacks: Vec<&ApiSignature> = model
        .callback_registry()
        .iter()
        .filter(|c| model.supergraph_for(c).is_some())
        .collect();
    if callbacks.is_empty() {
        return Err(SimError::Contract("model has no callback supergraph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let sim = Sim {
        model,
        sc,
        orphans: model.supergraphs().iter().map(orphans).collect(),
    };

    let mut streams: Vec<Vec<Item>> = Vec::with_capacity(sc.threads);
    let mut thread_segments: Vec<Vec<SegmentTruth>> = Vec::with_capacity(sc.threads);
    for t in 0..sc.threads {
        let tid = t as u32 + 1;
        let mut queue: VecDeque<&ApiSignature> =
            (0..sc.events).map(|_| *callbacks.choose(&mut rng).expect("non-empty")).collect();
        let mut items = Vec::new();
        let mut segs = Vec::new();
        while let Some(cb) = queue.pop_front() {
            let run = sim.run_callback(cb, &mut rng);
            let si = segs.len();
            for (rec, chain_len) in run.records {
                items.push(Item {
                    record: LogRecord { tid, ..rec },
                    tag: Tag::App,
                    chain_len,
                    segment: Some((t, si)),
                });
            }
            // bound ICC chains so mutually starting components terminate
            if segs.len() < 4 * sc.events {
                for next in run.started.into_iter().rev() {
                    queue.push_front(next);
                }
            }
            segs.push(SegmentTruth {
                callback: cb.to_string(),
                callback_seq: 0,
                walk: run.walk,
                node_sequence: run.node_sequence,
                match_positions: run.match_positions,
                record_seqs: Vec::new(),
            });
        }
        let app = items.len();
        let lib = (sc.noise / (1.0 - sc.noise) * app as f64).round() as usize;
        for _ in 0..lib {
            let at = rng.gen_range(0..=items.len());
            items.insert(at, library_item(sc, tid, &mut rng));
        }
        streams.push(items);
        thread_segments.push(segs);
    }

    // interleave threads, weighting by what each has left
    let mut merged = Vec::new();
    let mut cursors = vec![0usize; streams.len()];
    loop {
        let left: Vec<usize> = streams.iter().zip(&cursors).map(|(s, &c)| s.len() - c).collect();
        let total: usize = left.iter().sum();
        if total == 0 {
            break;
        }
        let mut pick = rng.gen_range(0..total);
        let t = left
            .iter()
            .position(|&l| {
                if pick < l {
                    true
                } else {
                    pick -= l;
                    false
                }
            })
            .expect("pick within total");
        merged.push(streams[t][cursors[t]].clone());
        cursors[t] += 1;
    }
    let foreign = (sc.foreign / (1.0 - sc.foreign) * merged.len() as f64).round() as usize;
    for _ in 0..foreign {
        let at = rng.gen_range(0..=merged.len());
        merged.insert(at, foreign_item(sc, &mut rng));
    }

    let mut records = Vec::with_capacity(merged.len());
    let mut truths = Vec::with_capacity(merged.len());
    for (i, item) in merged.into_iter().enumerate() {
        let seq = i as u64 + 1;
        if let Some((t, s)) = item.segment {
            let seg = &mut thread_segments[t][s];
            if seg.record_seqs.is_empty() {
                seg.callback_seq = seq;
            }
            seg.record_seqs.push(seq);
        }
        truths.push(RecordTruth {
            seq,
            pid: item.record.pid,
            tid: item.record.tid,
            tag: item.tag,
            chain_len: item.chain_len,
            window: item.record.csi.p.iter().map(ToString::to_string).collect(),
        });
        records.push(LogRecord { seq, ..item.record });
    }
    let truth = GroundTruth {
        base_offset: sc.base_offset,
        k: sc.k,
        pid: sc.pid,
        records: truths,
        threads: thread_segments
            .into_iter()
            .enumerate()
            .map(|(t, segments)| ThreadTruth {
                tid: t as u32 + 1,
                segments,
            })
            .collect(),
    };
    Ok((LogSequence::new(records, sc.k), truth))
}

#[derive(Debug, Clone)]
struct Item {
    record: LogRecord,
    tag: Tag,
    chain_len: usize,
    segment: Option<(usize, usize)>,
}

fn parse(s: &str) -> ApiSignature {
    s.parse().expect("built-in signature")
}

fn library_item(sc: &Scenario, tid: u32, rng: &mut ChaCha8Rng) -> Item {
    let depth = rng.gen_range(1..=2);
    let shown = depth.min(sc.k);
    let p: Vec<ApiSignature> = LIBRARY_FRAMES[depth - shown..depth].iter().map(|f| parse(f)).collect();
    let api = LIBRARY_APIS.choose(rng).expect("pool");
    Item {
        record: LogRecord {
            seq: 0,
            pid: sc.pid,
            tid,
            des: Des::plain(parse(api)),
            csi: CallStackInfo {
                d: sc.base_offset.saturating_sub(3) + depth as u32,
                p,
            },
        },
        tag: Tag::Library,
        chain_len: 0,
        segment: None,
    }
}

fn foreign_item(sc: &Scenario, rng: &mut ChaCha8Rng) -> Item {
    Item {
        record: LogRecord {
            seq: 0,
            pid: sc.pid + 1,
            tid: rng.gen_range(1..=4),
            des: Des::plain(parse(GET_DEVICE_ID)),
            csi: CallStackInfo {
                p: vec![parse(FOREIGN_FRAME)],
                d: sc.base_offset + 1,
            },
        },
        tag: Tag::Foreign,
        chain_len: 0,
        segment: None,
    }
}

/// App methods of `g` that no static call reaches, excluding the root,
/// as (entry id, signature) sorted by entry id.
fn orphans(g: &Supergraph) -> Vec<(NodeId, ApiSignature)> {
    let called: HashSet<&ApiSignature> = g
        .nodes()
        .iter()
        .filter_map(|n| match n.statement.callee() {
            Some(CalleeRef::Static(m)) => Some(&m.signature),
            _ => None,
        })
        .collect();
    let mut out: Vec<(NodeId, ApiSignature)> = g
        .methods()
        .filter(|m| m.method != g.root_callback && !called.contains(&m.method.signature))
        .filter_map(|m| m.entry.map(|e| (e, m.method.signature.clone())))
        .collect();
    out.sort();
    out
}

struct Sim<'a> {
    model: &'a AppModel,
    sc: &'a Scenario,
    orphans: Vec<Vec<(NodeId, ApiSignature)>>,
}

/// Where a frame's nodes live: the base graph, or a clone embedded at a
/// reflective site for a target.
#[derive(Debug, Clone)]
struct Frame {
    method: ApiSignature,
    entry: NodeId,
    embed: Option<(NodeId, ApiSignature)>,
    /// Node to resume at in the caller, in the caller's frame.
    ret: Option<NodeId>,
}

impl Frame {
    fn map(&self, orig: NodeId) -> NodeId {
        match &self.embed {
            Some((site, target)) => synthetic_id(*site, target, orig),
            None => orig,
        }
    }
}

struct Run<'a> {
    walk: Vec<NodeId>,
    node_sequence: Vec<NodeId>,
    match_positions: Vec<usize>,
    records: Vec<(LogRecord, usize)>,
    started: Vec<&'a ApiSignature>,
}

impl<'a> Sim<'a> {
    fn record(&self, api: ApiSignature, special: Special, stack: &[Frame]) -> (LogRecord, usize) {
        let len = stack.len();
        let from = len.saturating_sub(self.sc.k);
        let args = match &special {
            Special::Reflective { target } => vec![target.to_string()],
            Special::Icc {
                target_component, ..
            } => vec![target_component.clone()],
            Special::None => Vec::new(),
        };
        let rec = LogRecord {
            seq: 0,
            pid: self.sc.pid,
            tid: 0,
            des: Des {
                signature: api,
                args,
                special,
            },
            csi: CallStackInfo {
                p: stack[from..].iter().map(|f| f.method.clone()).collect(),
                d: self.sc.base_offset + len as u32,
            },
        };
        (rec, len)
    }

    fn run_callback(&self, cb: &ApiSignature, rng: &mut ChaCha8Rng) -> Run<'a> {
        let model = self.model;
        let gi = model
            .supergraphs()
            .iter()
            .position(|g| &g.root_callback.signature == cb)
            .expect("callback has a supergraph");
        let g = &model.supergraphs()[gi];
        let entry = g.entry().expect("validated root CFG");
        let mut stack = vec![Frame {
            method: cb.clone(),
            entry,
            embed: None,
            ret: None,
        }];
        let mut run = Run {
            walk: Vec::new(),
            node_sequence: Vec::new(),
            match_positions: vec![0],
            records: vec![self.record(cb.clone(), Special::None, &stack)],
            started: Vec::new(),
        };
        let mut cur = Some(entry);
        let mut last_record_at = 0usize;
        while let Some(orig) = cur {
            let frame = stack.last().expect("walk has a frame").clone();
            run.walk.push(frame.map(orig));
            let node = g.node(orig).expect("walk stays in the supergraph");
            let flow_next = g.flow_successor(orig);
            cur = match &node.statement.kind {
                StatementKind::Exit => {
                    let done = stack.pop().expect("frame");
                    if stack.is_empty() {
                        None
                    } else {
                        done.ret
                    }
                }
                StatementKind::Call(CalleeRef::Static(callee)) => {
                    let target = g
                        .out_edges(orig)
                        .find(|e| e.kind == EdgeKind::CallEnter)
                        .map(|e| e.to)
                        .expect("validated call edge");
                    stack.push(Frame {
                        method: callee.signature.clone(),
                        entry: target,
                        embed: frame.embed.clone(),
                        ret: flow_next,
                    });
                    Some(target)
                }
                StatementKind::Call(CalleeRef::Framework(api)) => {
                    if model.is_logged(api) {
                        last_record_at = run.walk.len() - 1;
                        run.match_positions.push(last_record_at);
                        run.records.push(self.record(api.clone(), Special::None, &stack));
                    }
                    flow_next
                }
                StatementKind::Call(CalleeRef::Reflective { api }) => {
                    let site = frame.map(orig);
                    let app = self.orphans[gi]
                        .iter()
                        .filter(|(e, _)| *e > frame.entry)
                        .collect::<Vec<_>>();
                    let use_app = !app.is_empty()
                        && stack.len() < self.sc.max_chain
                        && rng.gen_bool(self.sc.app_target_probability);
                    let target = if use_app {
                        app.choose(rng).expect("non-empty").1.clone()
                    } else {
                        parse(FRAMEWORK_TARGETS.choose(rng).expect("pool"))
                    };
                    last_record_at = run.walk.len() - 1;
                    run.match_positions.push(last_record_at);
                    run.records.push(self.record(
                        api.clone(),
                        Special::Reflective {
                            target: target.clone(),
                        },
                        &stack,
                    ));
                    if use_app {
                        let t_entry = g.method_cfg(&target).and_then(|m| m.entry).expect("orphan entry");
                        stack.push(Frame {
                            method: target.clone(),
                            entry: t_entry,
                            embed: Some((site, target)),
                            ret: flow_next,
                        });
                        Some(t_entry)
                    } else {
                        run.walk.push(synthetic_id(site, &target, u64::MAX));
                        if model.is_logged(&target) {
                            last_record_at = run.walk.len() - 1;
                            run.match_positions.push(last_record_at);
                            run.records.push(self.record(target, Special::None, &stack));
                        }
                        flow_next
                    }
                }
                StatementKind::Call(CalleeRef::Icc { api }) => {
                    let guesses: Vec<&Supergraph> = g
                        .out_edges(orig)
                        .filter(|e| e.kind == EdgeKind::CallEnter)
                        .filter_map(|e| model.supergraphs().iter().find(|o| o.entry() == Some(e.to)))
                        .collect();
                    let origin = g.root_callback.signature.declaring_unit().to_string();
                    let target = guesses.choose(rng).copied();
                    let target_component = target
                        .map(|t| t.root_callback.signature.declaring_unit().to_string())
                        .unwrap_or_else(|| origin.clone());
                    if let Some(t) = target {
                        run.started.push(&t.root_callback.signature);
                    }
                    last_record_at = run.walk.len() - 1;
                    run.match_positions.push(last_record_at);
                    run.records.push(self.record(
                        api.clone(),
                        Special::Icc {
                            origin_component: origin,
                            target_component,
                        },
                        &stack,
                    ));
                    flow_next
                }
                _ => {
                    let succ: BTreeSet<NodeId> = g
                        .out_edges(orig)
                        .filter(|e| e.kind == EdgeKind::Flow)
                        .map(|e| e.to)
                        .collect();
                    let succ: Vec<NodeId> = succ.into_iter().collect();
                    succ.choose(rng).copied()
                }
            };
        }
        run.node_sequence = run.walk[..=last_record_at].to_vec();
        run
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::verify_walk;
    use crate::sim::builder::ModelBuilder;
    use crate::sim::fixtures::{dispatch_example, CLICK, HIDDEN, INVOKE, START_ACTIVITY};

    const A: &str = "android.t.Api.a()V";
    const B: &str = "android.t.Api.b()V";

    /// Callback → L2 → ... → L`depth`, the deepest calling `A`; `B` after the outer call.
    fn chain(depth: usize) -> AppModel {
        let name = |d: usize| {
            if d == 1 {
                "com.t.Main.onResume()V".to_string()
            } else {
                format!("com.t.L{d}.run()V")
            }
        };
        let mut mb = ModelBuilder::new();
        mb.logged(A).logged(B);
        let mut g = mb.supergraph(&name(1));
        for d in 1..=depth {
            let m = name(d);
            let mut ids = vec![g.entry(&m)];
            if d < depth {
                ids.push(g.call_app(&m, &name(d + 1)));
            } else {
                ids.push(g.call_framework(&m, A, "a()"));
            }
            if d == 1 {
                ids.push(g.call_framework(&m, B, "b()"));
            }
            ids.push(g.exit(&m));
            g.chain(&ids);
        }
        g.finish();
        mb.build()
    }

    fn quiet(k: usize) -> Scenario {
        Scenario {
            k,
            events: 1,
            noise: 0.0,
            ..Scenario::default()
        }
    }

    fn segments(log: &LogSequence, truth: &GroundTruth) -> Vec<(LogSegment, SegmentTruth)> {
        truth
            .segments()
            .map(|s| (s.log_segment(log).expect("records present"), s.clone()))
            .collect()
    }

    #[test]
    fn depth_rises_and_falls_with_nesting() {
        let m = chain(2);
        let (log, truth) = simulate_with(&m, &quiet(11)).unwrap();
        let d: Vec<u32> = log.records.iter().map(|r| r.csi.d).collect();
        assert_eq!(d, vec![8, 9, 8]);
        assert_eq!(truth.count(Tag::App), 3);
        let sigs: Vec<String> = log.records.iter().map(|r| r.des.signature.to_string()).collect();
        assert_eq!(&sigs[1..], &[A.to_string(), B.to_string()]);
    }

    #[test]
    fn window_truncates_to_k() {
        let m = chain(5);
        let (log, _) = simulate_with(&m, &quiet(1)).unwrap();
        assert!(log.records.iter().all(|r| r.csi.p.len() == 1));
        assert_eq!(log.records[1].csi.p[0].to_string(), "com.t.L5.run()V");
        assert_eq!(log.records[1].csi.d, 7 + 5);
    }

    #[test]
    fn eleven_frames_give_depth_eighteen() {
        let m = chain(11);
        for k in [4, 11, 20] {
            let (log, truth) = simulate_with(&m, &quiet(k)).unwrap();
            let deep = &log.records[1];
            assert_eq!(deep.csi.d, 18);
            assert_eq!(deep.csi.p.len(), k.min(11));
            assert_eq!(deep.csi.d - truth.base_offset, truth.records[1].chain_len as u32);
        }
    }

    #[test]
    fn truth_is_a_valid_walk_and_projects_to_the_log() {
        let m = chain(4);
        let (log, truth) = simulate(&m, 3, 11, 2).unwrap();
        for (seg, t) in segments(&log, &truth) {
            verify_walk(&m, &seg, 11, &t.node_sequence, &t.match_positions).unwrap();
            assert_eq!(t.walk[..t.node_sequence.len()], t.node_sequence[..]);
        }
    }

    #[test]
    fn noise_share_and_tags() {
        let m = chain(3);
        let sc = Scenario {
            events: 4,
            threads: 2,
            foreign: 0.2,
            ..Scenario::default()
        };
        let (log, truth) = simulate_with(&m, &sc).unwrap();
        let app = truth.count(Tag::App);
        assert_eq!(truth.count(Tag::Library), app);
        assert!(truth.count(Tag::Foreign) > 0);
        for (r, t) in log.records.iter().zip(&truth.records) {
            assert_eq!((r.seq, r.pid, r.tid), (t.seq, t.pid, t.tid));
            assert_eq!(r.pid != sc.pid, t.tag == Tag::Foreign);
        }
        let seqs: Vec<u64> = log.records.iter().map(|r| r.seq).collect();
        assert_eq!(seqs, (1..=log.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = chain(3);
        let a = simulate(&m, 9, 11, 3).unwrap();
        let b = simulate(&m, 9, 11, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, simulate(&m, 10, 11, 3).unwrap().0);
    }

    #[test]
    fn reflective_and_icc_records() {
        let f = dispatch_example();
        let sc = Scenario {
            app_target_probability: 1.0,
            events: 1,
            noise: 0.0,
            ..Scenario::default()
        };
        let click = (0..64)
            .map(|seed| simulate_with(&f.model, &Scenario { seed, ..sc.clone() }).unwrap())
            .find(|(_, t)| t.threads[0].segments[0].callback == CLICK)
            .expect("some seed starts with the click callback");
        let (log, truth) = click;
        let sigs: Vec<String> = log.records.iter().map(|r| r.des.signature.to_string()).collect();
        assert_eq!(sigs[1], INVOKE);
        assert_eq!(
            log.records[1].des.special,
            Special::Reflective {
                target: HIDDEN.parse().unwrap()
            }
        );
        let leak = &log.records[2];
        assert_eq!(leak.csi.p.iter().map(|s| s.to_string()).collect::<Vec<_>>(), vec![CLICK, HIDDEN]);
        assert_eq!(sigs[3], START_ACTIVITY);
        let Special::Icc { target_component, .. } = &log.records[3].des.special else {
            panic!("icc record expected");
        };
        let started = &truth.threads[0].segments[1];
        assert!(started.callback.starts_with(target_component.as_str()));
        for (seg, t) in segments(&log, &truth) {
            verify_walk(&f.model, &seg, 11, &t.node_sequence, &t.match_positions).unwrap();
        }
    }

    #[test]
    fn contract_errors() {
        let m = chain(2);
        assert!(simulate(&m, 0, 0, 1).is_err());
        assert!(simulate(&m, 0, 1, 0).is_err());
        let bad = Scenario {
            noise: 1.0,
            ..Scenario::default()
        };
        assert!(simulate_with(&m, &bad).is_err());
    }
}
