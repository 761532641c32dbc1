//! Log pipeline and path combination checked against simulator ground truth.

use std::collections::BTreeMap;

use stackmatch::log::{filter_library_records, partition_by_thread, scope, LogSequence};
use stackmatch::matcher::{combine, match_all, verify_walk, MatchConfig};
use stackmatch::sim::gen::{generate_app, GenParams};
use stackmatch::sim::{agrees_with_truth, simulate_with, Scenario, Tag};

fn params(seed: u64) -> GenParams {
    GenParams { node_budget: 500, branch_fraction: 0.25, icc_links: 1, seed, ..GenParams::default() }
}

#[test]
fn scoping_keeps_exactly_the_target_app() {
    let m = generate_app(&params(1)).unwrap();
    let sc = Scenario { seed: 4, foreign: 0.4, threads: 2, ..Scenario::default() };
    let (log, truth) = simulate_with(&m, &sc).unwrap();
    assert!(truth.count(Tag::Foreign) > 0);
    let scoped = scope(&log, sc.pid);
    assert_eq!(scoped.len(), truth.count(Tag::App) + truth.count(Tag::Library));
}

#[test]
fn library_filter_on_a_hundred_record_slice() {
    let m = generate_app(&params(2)).unwrap();
    let sc = Scenario { seed: 9, noise: 0.5, ..Scenario::default() };
    let (log, truth) = simulate_with(&m, &sc).unwrap();
    let tag: BTreeMap<u64, Tag> = truth.records.iter().map(|r| (r.seq, r.tag)).collect();
    let mut lib: Vec<_> = log.records.iter().filter(|r| tag[&r.seq] == Tag::Library).take(37).cloned().collect();
    let app: Vec<_> = log.records.iter().filter(|r| tag[&r.seq] == Tag::App).take(63).cloned().collect();
    assert_eq!((lib.len(), app.len()), (37, 63));
    lib.extend(app);
    lib.sort_by_key(|r| r.seq);
    let slice = LogSequence::new(lib, log.k);
    let kept = filter_library_records(&slice, m.library_prefixes());
    assert_eq!(kept.len(), 63);
    assert!(kept.records.iter().all(|r| tag[&r.seq] == Tag::App));
}

#[test]
fn thread_partitions_match_the_labelled_threads() {
    let m = generate_app(&params(3)).unwrap();
    let sc = Scenario { seed: 2, threads: 2, ..Scenario::default() };
    let (log, truth) = simulate_with(&m, &sc).unwrap();
    let parts = partition_by_thread(&log);
    assert_eq!(parts.len(), 2);
    for part in parts {
        let tid = part.records[0].tid;
        let want: Vec<u64> = truth.records.iter().filter(|r| r.tid == tid).map(|r| r.seq).collect();
        let got: Vec<u64> = part.records.iter().map(|r| r.seq).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn call_chains_deeper_than_the_window_still_match() {
    let p = GenParams { max_call_depth: 8, reflective_fraction: 0.0, ..params(5) };
    let m = generate_app(&p).unwrap();
    let sc = Scenario { seed: 1, k: 2, ..Scenario::default() };
    let (log, truth) = simulate_with(&m, &sc).unwrap();
    assert!(truth.records.iter().any(|r| r.chain_len > sc.k), "fixture needs a chain deeper than K");
    let report = match_all(&m, &log, &MatchConfig::default());
    assert!(report.all_matched());
    for s in truth.segments() {
        let seg = s.log_segment(&log).unwrap();
        let path = report.paths().find(|p| p.callback_seq == s.callback_seq).unwrap();
        verify_walk(&m, &seg, log.k, &path.nodes, &path.match_positions).unwrap();
    }
    if !report.any_ambiguous() {
        assert!(agrees_with_truth(&report, &truth));
    }
}

#[test]
fn three_segments_give_two_joins() {
    let m = generate_app(&params(6)).unwrap();
    let sc = Scenario { seed: 3, events: 3, ..Scenario::default() };
    let (log, truth) = simulate_with(&m, &sc).unwrap();
    let report = match_all(&m, &log, &MatchConfig::default());
    let thread = &report.threads[0];
    let segs: Vec<_> = thread.paths.iter().cloned().map(Option::unwrap).collect();
    assert!(segs.len() >= 3, "{} segments", segs.len());
    let three = segs[..3].to_vec();
    let total: usize = three.iter().map(|s| s.nodes.len()).sum();
    let path = combine(&m, three).unwrap();
    assert_eq!(path.joins.len(), 2);
    assert_eq!(path.nodes().count(), total);
    assert_eq!(thread.joins.len(), segs.len() - 1);
    let truth_nodes: usize = truth.segments().map(|s| s.node_sequence.len()).sum();
    if !report.any_ambiguous() {
        assert_eq!(segs.iter().map(|s| s.nodes.len()).sum::<usize>(), truth_nodes);
    }
}
