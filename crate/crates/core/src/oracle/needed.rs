//! Brute-force needed set and floor lookups over an append history.

use std::collections::BTreeSet;

use crate::ts::Timestamp;

fn last_at_or_before(history: &[(u64, Timestamp)], x: Timestamp) -> Option<usize> {
    history.iter().rposition(|&(_, s)| s <= x)
}

/// Whether the `idx`-th appended node is needed w.r.t. (`a`, `t`).
///
/// `history` lists (node id, stamp) in append order, sentinel excluded.
pub fn is_needed(history: &[(u64, Timestamp)], idx: usize, a: &[Timestamp], t: Timestamp) -> bool {
    if history[idx].1 > t {
        return true;
    }
    let hit = |x| last_at_or_before(history, x) == Some(idx);
    hit(t) || a.iter().any(|&x| hit(x))
}

pub fn needed_set(history: &[(u64, Timestamp)], a: &[Timestamp], t: Timestamp) -> BTreeSet<u64> {
    (0..history.len()).filter(|&i| is_needed(history, i, a, t)).map(|i| history[i].0).collect()
}

/// Payload of the last entry with stamp ≤ `k`, scanning in append order.
pub fn floor_lookup<V: Copy>(entries: &[(Timestamp, V)], k: Timestamp) -> Option<V> {
    entries.iter().rev().find(|(s, _)| *s <= k).map(|&(_, v)| v)
}
