//! Simple singly-linked version list with whole-list compaction.
//!
//! Nodes are never removed one at a time. `compact(A, t, h)` walks from `h`
//! towards the sentinel and splices out every node that no rtx announced in
//! `A` (or starting at or after `t`) can still read.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering::*};

use crate::heap::{AtomicGc, Gc, Heap, Trace, Tracer};
use crate::ts::{GlobalClock, Timestamp};

pub struct SslNode<V> {
    ts: AtomicI64,
    val: V,
    left: AtomicGc<SslNode<V>>,
    seq: AtomicU64,
}

unsafe impl<V: Trace> Trace for SslNode<V> {
    fn trace(&self, t: &mut Tracer) {
        self.val.trace(t);
        self.left.trace(t);
    }
}

impl<V: Copy> SslNode<V> {
    pub fn ts(&self) -> Timestamp {
        Timestamp(self.ts.load(SeqCst))
    }

    /// Resolves a TBD stamp to the current clock value (at most once).
    pub fn stamp(&self, clock: &GlobalClock) -> Timestamp {
        let k = self.ts();
        if k != Timestamp::TBD {
            return k;
        }
        match self.ts.compare_exchange(Timestamp::TBD.0, clock.read().0, SeqCst, SeqCst) {
            Ok(_) => self.ts(),
            Err(v) => Timestamp(v),
        }
    }

    pub fn val(&self) -> V {
        self.val
    }

    pub fn left(&self) -> Option<Gc<SslNode<V>>> {
        self.left.load(SeqCst)
    }

    /// Append index: 0 for the sentinel, predecessor + 1 otherwise.
    pub fn seq(&self) -> u64 {
        self.seq.load(Relaxed)
    }
}

/// Raw copy of a node's mutable fields, for rewinding in the explorer.
#[doc(hidden)]
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct SslImage<V> {
    ts: i64,
    left: Option<Gc<SslNode<V>>>,
    seq: u64,
}

impl<V> Clone for SslImage<V> {
    fn clone(&self) -> Self {
        SslImage { ts: self.ts, left: self.left, seq: self.seq }
    }
}

impl<V> SslNode<V> {
    #[doc(hidden)]
    pub fn image(&self) -> SslImage<V> {
        SslImage { ts: self.ts.load(SeqCst), left: self.left.load(SeqCst), seq: self.seq.load(SeqCst) }
    }

    #[doc(hidden)]
    pub fn restore(&self, img: &SslImage<V>) {
        self.ts.store(img.ts, SeqCst);
        self.left.store(img.left, SeqCst);
        self.seq.store(img.seq, SeqCst);
    }
}

pub struct SslList<V> {
    head: AtomicGc<SslNode<V>>,
    sentinel: Gc<SslNode<V>>,
}

unsafe impl<V: Trace> Trace for SslList<V> {
    fn trace(&self, t: &mut Tracer) {
        self.head.trace(t);
        self.sentinel.trace(t);
    }
}

/// Work done by one compaction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CompactStats {
    /// Nodes the cursors visited.
    pub traversed: u64,
    /// Successful splicing CASes.
    pub splices: u64,
}

impl<V: Copy + Trace + Send + Sync + 'static> SslList<V> {
    pub fn new(heap: &Heap, bottom: V) -> Self {
        let sentinel = Self::node(heap, Timestamp::NEG_INF, bottom);
        SslList { head: AtomicGc::new(Some(sentinel)), sentinel }
    }

    pub fn node(heap: &Heap, ts: Timestamp, val: V) -> Gc<SslNode<V>> {
        heap.alloc(SslNode {
            ts: AtomicI64::new(ts.0),
            val,
            left: AtomicGc::null(),
            seq: AtomicU64::new(0),
        })
    }
}

impl<V: Copy> SslList<V> {
    pub fn head(&self) -> Gc<SslNode<V>> {
        self.head.load(SeqCst).expect("head is never null")
    }

    pub fn sentinel(&self) -> Gc<SslNode<V>> {
        self.sentinel
    }

    pub fn peek_head(&self) -> V {
        self.head().val
    }

    pub fn search(&self, k: Timestamp) -> V {
        self.search_node(k).val
    }

    pub fn search_node(&self, k: Timestamp) -> Gc<SslNode<V>> {
        let mut x = self.head();
        while x.ts() > k {
            x = x.left().expect("walk ends at the sentinel");
        }
        x
    }

    pub fn try_append(&self, x: Gc<SslNode<V>>, y: Gc<SslNode<V>>) -> bool {
        let mut op = TryAppendOp::new(x, y);
        loop {
            if let Some(r) = op.step(self) {
                return r;
            }
        }
    }

    /// Splices out nodes appended before `h` that are not needed w.r.t.
    /// (`a`, `t`). `a` must be sorted ascending and `h` must be stamped.
    pub fn compact(&self, a: &[Timestamp], t: Timestamp, h: Gc<SslNode<V>>) -> CompactStats {
        let mut op = CompactOp::new(self, a, t, h);
        while !op.step() {}
        op.stats()
    }

    #[doc(hidden)]
    pub fn set_head(&self, h: Gc<SslNode<V>>) {
        self.head.store(Some(h), SeqCst);
    }

    /// Nodes reached from head, newest first.
    pub fn reachable(&self) -> Vec<Gc<SslNode<V>>> {
        let mut out = vec![self.head()];
        while let Some(l) = out.last().unwrap().left() {
            out.push(l);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum AppendPc {
    InitLeft,
    CasHead,
    Done,
}

#[derive(PartialEq, Eq, Hash)]
pub struct TryAppendOp<V> {
    x: Gc<SslNode<V>>,
    y: Gc<SslNode<V>>,
    pc: AppendPc,
    result: Option<bool>,
}

impl<V> Clone for TryAppendOp<V> {
    fn clone(&self) -> Self {
        TryAppendOp { x: self.x, y: self.y, pc: self.pc, result: self.result }
    }
}

impl<V: Copy> TryAppendOp<V> {
    pub fn new(x: Gc<SslNode<V>>, y: Gc<SslNode<V>>) -> Self {
        TryAppendOp { x, y, pc: AppendPc::InitLeft, result: None }
    }

    pub fn is_done(&self) -> bool {
        self.pc == AppendPc::Done
    }

    pub fn step(&mut self, list: &SslList<V>) -> Option<bool> {
        match self.pc {
            AppendPc::InitLeft => {
                self.y.left.store(Some(self.x), SeqCst);
                self.y.seq.store(self.x.seq() + 1, Relaxed);
                self.pc = AppendPc::CasHead;
            }
            AppendPc::CasHead => {
                self.result = Some(list.head.compare_exchange(Some(self.x), Some(self.y)).is_ok());
                self.pc = AppendPc::Done;
            }
            AppendPc::Done => {}
        }
        self.result
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CompactPc {
    ReadNext,
    ReadNewNext,
    AdvanceNewNext,
    Cas,
    Reread,
    AdvanceCur,
    Done,
}

/// A successful splice, exposed for invariant checks.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct Splice<V> {
    pub node: Gc<SslNode<V>>,
    pub old: Gc<SslNode<V>>,
    pub new: Gc<SslNode<V>>,
}

impl<V> Clone for Splice<V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for Splice<V> {}

/// `compact(A, t, h)` as a step machine.
///
/// Only accesses to mutable shared state (left links) are separate steps;
/// stamps are immutable by the time a compaction can see them.
#[derive(PartialEq, Eq, Hash)]
pub struct CompactOp<'a, V> {
    sentinel: Gc<SslNode<V>>,
    a: &'a [Timestamp],
    t: Timestamp,
    /// Index into `a` shifted by one; 0 is the PAD entry.
    i: usize,
    cur: Gc<SslNode<V>>,
    next: Gc<SslNode<V>>,
    new_next: Gc<SslNode<V>>,
    pc: CompactPc,
    stats: CompactStats,
    last_splice: Option<Splice<V>>,
}

impl<V> Clone for CompactOp<'_, V> {
    fn clone(&self) -> Self {
        CompactOp {
            sentinel: self.sentinel,
            a: self.a,
            t: self.t,
            i: self.i,
            cur: self.cur,
            next: self.next,
            new_next: self.new_next,
            pc: self.pc,
            stats: self.stats,
            last_splice: self.last_splice,
        }
    }
}

impl<'a, V: Copy> CompactOp<'a, V> {
    pub fn new(list: &SslList<V>, a: &'a [Timestamp], t: Timestamp, h: Gc<SslNode<V>>) -> Self {
        debug_assert!(a.windows(2).all(|w| w[0] < w[1]), "A must be strictly ascending");
        debug_assert!(h.ts() != Timestamp::TBD, "compact from an unstamped node");
        let pc = if h == list.sentinel { CompactPc::Done } else { CompactPc::ReadNext };
        CompactOp {
            sentinel: list.sentinel,
            a,
            t,
            i: a.len(),
            cur: h,
            next: h,
            new_next: h,
            pc,
            stats: CompactStats { traversed: 1, splices: 0 },
            last_splice: None,
        }
    }

    fn a_at(&self, i: usize) -> Timestamp {
        if i == 0 {
            Timestamp::PAD
        } else {
            self.a[i - 1]
        }
    }

    pub fn is_done(&self) -> bool {
        self.pc == CompactPc::Done
    }

    pub fn stats(&self) -> CompactStats {
        self.stats
    }

    /// Node the main cursor currently sits on.
    pub fn cursor(&self) -> Gc<SslNode<V>> {
        self.cur
    }

    pub fn take_splice(&mut self) -> Option<Splice<V>> {
        self.last_splice.take()
    }

    fn move_cur(&mut self, to: Gc<SslNode<V>>) -> CompactPc {
        self.cur = to;
        self.stats.traversed += 1;
        if to == self.sentinel {
            CompactPc::Done
        } else {
            CompactPc::ReadNext
        }
    }

    fn new_next_done(&self) -> bool {
        self.a_at(self.i) >= self.new_next.ts()
    }

    /// Executes one step; true once the compaction has returned.
    pub fn step(&mut self) -> bool {
        use CompactPc::*;
        self.pc = match self.pc {
            ReadNext => {
                self.next = self.cur.left().expect("non-sentinel has a left link");
                let cur_ts = self.cur.ts();
                if cur_ts > self.t {
                    self.move_cur(self.next)
                } else {
                    while self.a_at(self.i) >= cur_ts {
                        self.i -= 1;
                    }
                    if self.a_at(self.i) >= self.next.ts() {
                        self.move_cur(self.next)
                    } else {
                        ReadNewNext
                    }
                }
            }
            ReadNewNext => {
                self.new_next = self.next.left().expect("unneeded node is not the sentinel");
                self.stats.traversed += 1;
                if self.new_next_done() {
                    Cas
                } else {
                    AdvanceNewNext
                }
            }
            AdvanceNewNext => {
                self.new_next = self.new_next.left().expect("walk ends at the sentinel");
                self.stats.traversed += 1;
                if self.new_next_done() {
                    Cas
                } else {
                    AdvanceNewNext
                }
            }
            Cas => {
                if self.cur.left.compare_exchange(Some(self.next), Some(self.new_next)).is_ok() {
                    self.stats.splices += 1;
                    self.last_splice = Some(Splice { node: self.cur, old: self.next, new: self.new_next });
                    AdvanceCur
                } else {
                    Reread
                }
            }
            Reread => {
                self.next = self.cur.left().expect("non-sentinel has a left link");
                if self.next.ts() <= self.new_next.ts() {
                    AdvanceCur
                } else {
                    Cas
                }
            }
            AdvanceCur => {
                let l = self.cur.left().expect("non-sentinel has a left link");
                self.move_cur(l)
            }
            Done => Done,
        };
        self.pc == Done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[i64]) -> Vec<Timestamp> {
        v.iter().map(|&x| Timestamp(x)).collect()
    }

    fn list_with(heap: &Heap, stamps: &[i64]) -> SslList<u64> {
        let list = SslList::new(heap, 0);
        for &k in stamps {
            let y = SslList::node(heap, Timestamp(k), k as u64);
            assert!(list.try_append(list.head(), y));
        }
        list
    }

    fn stamps(list: &SslList<u64>) -> Vec<i64> {
        list.reachable().iter().map(|n| n.ts().0).collect()
    }

    #[test]
    fn equal_stamps_are_legal() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1, 2, 2, 4]);
        assert_eq!(stamps(&list), vec![4, 2, 2, 1, i64::MIN]);
        assert_eq!(list.head().seq(), 4);
    }

    #[test]
    fn stale_append_fails() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1]);
        let y = SslList::node(&heap, Timestamp(2), 2);
        assert!(!list.try_append(list.sentinel(), y));
        assert_eq!(stamps(&list), vec![1, i64::MIN]);
    }

    #[test]
    fn search_floor() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1, 2, 4, 5, 7]);
        assert_eq!(list.search(Timestamp(6)), 5);
        assert_eq!(list.search(Timestamp(7)), 7);
        assert_eq!(list.search(Timestamp(0)), 0);
    }

    #[test]
    fn compact_worked_example() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1, 2, 4, 5, 7]);
        let st = list.compact(&ts(&[3]), Timestamp(6), list.head());
        assert_eq!(stamps(&list), vec![7, 5, 2, i64::MIN]);
        assert_eq!(st.splices, 2);
    }

    #[test]
    fn compact_without_announcements_keeps_head() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1, 2, 4, 5, 7]);
        list.compact(&[], Timestamp(7), list.head());
        assert_eq!(stamps(&list), vec![7, i64::MIN]);
    }

    #[test]
    fn compact_with_every_stamp_announced_is_noop() {
        let heap = Heap::new();
        let list = list_with(&heap, &[1, 2, 4, 5, 7]);
        let st = list.compact(&ts(&[1, 2, 4, 5, 7]), Timestamp(9), list.head());
        assert_eq!(stamps(&list), vec![7, 5, 4, 2, 1, i64::MIN]);
        assert_eq!(st.splices, 0);
    }

    #[test]
    fn compact_drops_older_equal_stamp() {
        let heap = Heap::new();
        let list = list_with(&heap, &[3, 5, 5, 9]);
        list.compact(&ts(&[5]), Timestamp(9), list.head());
        assert_eq!(stamps(&list), vec![9, 5, i64::MIN]);
    }

    #[test]
    fn compact_from_sentinel_is_noop() {
        let heap = Heap::new();
        let list = list_with(&heap, &[]);
        let st = list.compact(&[], Timestamp(5), list.head());
        assert_eq!(st.splices, 0);
    }
}
