//! The depth/window check deciding how the search may continue at a node.

use super::EmuStack;
use crate::graph::Node;
use crate::log::LogRecord;
use crate::signature::ApiSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// The current chain agrees with the next record's window.
    Proceed,
    /// The current chain cannot host the next record; head back up.
    Backtrack,
    /// The window says nothing yet; search forward until its first frame appears.
    ForwardUnguided,
}

/// `dis = ΔD − ΔLen`: how many more frames must be pushed to reach the
/// chain length of the next record.
pub(crate) fn distance(delta_d: i64, delta_len: i64) -> i64 {
    delta_d - delta_len
}

pub(crate) fn decide(dis: i64, window_len: usize, matched: impl FnOnce() -> bool) -> Decision {
    if dis < 0 {
        Decision::Backtrack
    } else if (dis as u64) < window_len as u64 {
        if matched() {
            Decision::Proceed
        } else {
            Decision::Backtrack
        }
    } else {
        Decision::ForwardUnguided
    }
}

/// Window alignment over any frame representation. `frames` is bottom first,
/// `target_len` is the chain length the next record was logged at.
pub(crate) fn window_aligned<A, B>(
    frames: &[A],
    p: &[B],
    target_len: usize,
    eq: impl Fn(&A, &B) -> bool,
) -> bool {
    let start = target_len.saturating_sub(p.len());
    frames
        .iter()
        .enumerate()
        .skip(start)
        .all(|(i, f)| p.get(i - start).is_some_and(|q| eq(f, q)))
}

/// True iff every frame of `emu_cur` at depth `i >= w` equals `p[i - w]`,
/// where `w = max(0, target_len - |p|)`.
pub fn is_matched(emu_cur: &EmuStack, p: &[ApiSignature], target_len: usize) -> bool {
    window_aligned(&emu_cur.frames, p, target_len, |f, q| f.signature == *q)
}

/// Decide whether `_n` (already reflected in `emu_cur`) may be explored for
/// `lr_next`, given the state at the last matched record.
pub fn node_checking(
    _n: &Node,
    lr_last: &LogRecord,
    lr_next: &LogRecord,
    emu_last: &EmuStack,
    emu_cur: &EmuStack,
) -> Decision {
    let delta_d = i64::from(lr_next.csi.d) - i64::from(lr_last.csi.d);
    let delta_len = emu_cur.len() as i64 - emu_last.len() as i64;
    let dis = distance(delta_d, delta_len);
    let target = emu_last.len() as i64 + delta_d;
    decide(dis, lr_next.csi.p.len(), || {
        target >= 0 && is_matched(emu_cur, &lr_next.csi.p, target as usize)
    })
}
