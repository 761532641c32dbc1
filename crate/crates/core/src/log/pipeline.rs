//! Scope, filter, partition and segment a log.

use std::collections::{HashMap, HashSet};

use super::{LogRecord, LogSegment, LogSequence};
use crate::signature::ApiSignature;

/// Keep only the records produced by process `pid`.
pub fn scope(seq: &LogSequence, pid: u32) -> LogSequence {
    seq.with_records(seq.records.iter().filter(|r| r.pid == pid).cloned().collect())
}

fn is_library_record<S: AsRef<str>>(r: &LogRecord, prefixes: &[S]) -> bool {
    // no caller evidence: keep
    let Some(deepest) = r.csi.deepest() else {
        return false;
    };
    prefixes
        .iter()
        .any(|p| deepest.unit_has_prefix(p.as_ref()))
}

/// Drop records whose innermost caller frame is declared in a library unit.
pub fn filter_library_records<S: AsRef<str>>(seq: &LogSequence, prefixes: &[S]) -> LogSequence {
    split_library_records(seq, prefixes).0
}

/// Like [`filter_library_records`] but also returns the removed records.
pub fn split_library_records<S: AsRef<str>>(
    seq: &LogSequence,
    prefixes: &[S],
) -> (LogSequence, Vec<LogRecord>) {
    let (removed, kept): (Vec<_>, Vec<_>) = seq
        .records
        .iter()
        .cloned()
        .partition(|r| is_library_record(r, prefixes));
    (seq.with_records(kept), removed)
}

/// Seq numbers of records that carry no caller frame at all.
pub fn records_without_caller(seq: &LogSequence) -> Vec<u64> {
    seq.records
        .iter()
        .filter(|r| r.csi.p.is_empty())
        .map(|r| r.seq)
        .collect()
}

/// One sub-sequence per thread, ordered by each thread's first record.
pub fn partition_by_thread(seq: &LogSequence) -> Vec<LogSequence> {
    let mut slot: HashMap<u32, usize> = HashMap::new();
    let mut parts: Vec<LogSequence> = Vec::new();
    for r in &seq.records {
        let i = *slot.entry(r.tid).or_insert_with(|| {
            parts.push(seq.with_records(Vec::new()));
            parts.len() - 1
        });
        parts[i].records.push(r.clone());
    }
    parts
}

/// Per-callback segments plus the records seen before the first callback.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segmentation {
    pub segments: Vec<LogSegment>,
    pub prelude: Vec<LogRecord>,
}

/// Split a single-thread sequence at each callback record.
pub fn segment(seq: &LogSequence, callbacks: &HashSet<ApiSignature>) -> Segmentation {
    let mut out = Segmentation::default();
    for r in &seq.records {
        if callbacks.contains(&r.des.signature) {
            out.segments.push(LogSegment {
                callback: r.clone(),
                body: Vec::new(),
            });
        } else if let Some(last) = out.segments.last_mut() {
            last.body.push(r.clone());
        } else {
            out.prelude.push(r.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::{CallStackInfo, Des};

    fn rec(seq: u64, pid: u32, tid: u32, sig: &str, caller: Option<&str>) -> LogRecord {
        LogRecord {
            seq,
            pid,
            tid,
            des: Des::plain(sig.parse().unwrap()),
            csi: CallStackInfo {
                p: caller.into_iter().map(|c| c.parse().unwrap()).collect(),
                d: 9,
            },
        }
    }

    fn seq(records: Vec<LogRecord>) -> LogSequence {
        LogSequence::new(records, 11)
    }

    #[test]
    fn scope_by_pid() {
        let s = seq(vec![
            rec(1, 10, 1, "a.A.x()V", None),
            rec(2, 10, 1, "a.A.x()V", None),
            rec(3, 12, 1, "a.A.x()V", None),
        ]);
        assert_eq!(scope(&s, 10).len(), 2);
        assert_eq!(scope(&s, 99).len(), 0);
    }

    #[test]
    fn library_caller_removed() {
        let s = seq(vec![
            rec(1, 1, 1, "a.A.x()V", Some("android.app.Activity.performCreate()V")),
            rec(2, 1, 1, "a.A.x()V", Some("com.example.Main.onCreate()V")),
            rec(3, 1, 1, "a.A.x()V", None),
        ]);
        let f = filter_library_records(&s, &["android.app"]);
        assert_eq!(f.records.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(records_without_caller(&s), vec![3]);
    }

    #[test]
    fn filter_uses_deepest_frame_only() {
        let mut r = rec(1, 1, 1, "a.A.x()V", Some("android.app.Activity.performCreate()V"));
        r.csi.p.push("com.example.Main.onCreate()V".parse().unwrap());
        let f = filter_library_records(&seq(vec![r]), &["android.app", "java.security"]);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn threads_partition() {
        let s = seq(vec![
            rec(1, 1, 1, "a.A.x()V", None),
            rec(2, 1, 2, "a.A.x()V", None),
            rec(3, 1, 1, "a.A.x()V", None),
        ]);
        let parts = partition_by_thread(&s);
        assert_eq!(parts.iter().map(LogSequence::len).collect::<Vec<_>>(), vec![2, 1]);
        let single = seq(vec![rec(1, 1, 4, "a.A.x()V", None)]);
        assert_eq!(partition_by_thread(&single), vec![single]);
    }

    fn cbs(names: &[&str]) -> HashSet<ApiSignature> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    #[test]
    fn divide_at_callbacks() {
        let names = ["c.M.m2()V", "c.X.b()V", "c.X.c()V", "c.M.m3()V", "c.X.d()V"];
        let s = seq(names
            .iter()
            .enumerate()
            .map(|(i, n)| rec(i as u64, 1, 1, n, None))
            .collect());
        let out = segment(&s, &cbs(&["c.M.m2()V", "c.M.m3()V"]));
        assert!(out.prelude.is_empty());
        assert_eq!(out.segments.len(), 2);
        assert_eq!(out.segments[0].callback.seq, 0);
        assert_eq!(out.segments[0].body.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(out.segments[1].body.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![4]);
    }

    #[test]
    fn records_before_first_callback_are_prelude() {
        let s = seq(vec![rec(0, 1, 1, "c.X.b()V", None), rec(1, 1, 1, "c.M.m2()V", None)]);
        let out = segment(&s, &cbs(&["c.M.m2()V"]));
        assert_eq!(out.prelude.len(), 1);
        assert_eq!(out.segments.len(), 1);
        assert!(out.segments[0].body.is_empty());
    }

    #[test]
    fn repeated_callback_makes_two_segments() {
        let s = seq(vec![rec(0, 1, 1, "c.M.m2()V", None), rec(1, 1, 1, "c.M.m2()V", None)]);
        assert_eq!(segment(&s, &cbs(&["c.M.m2()V"])).segments.len(), 2);
    }
}
