//! Practical doubly-linked version list.
//!
//! Appends go to the right end, any superseded node can be removed given
//! only its handle, and `search` walks left from the head.

use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering::*};

use crate::heap::{AtomicGc, Gc, Heap, Trace, Tracer};
use crate::ts::{GlobalClock, Timestamp};

pub struct PdlNode<V> {
    key: AtomicI64,
    val: V,
    mark: AtomicBool,
    left: AtomicGc<PdlNode<V>>,
    right: AtomicGc<PdlNode<V>>,
    seq: AtomicU64,
}

unsafe impl<V: Trace> Trace for PdlNode<V> {
    fn trace(&self, t: &mut Tracer) {
        self.val.trace(t);
        self.left.trace(t);
        self.right.trace(t);
    }
}

impl<V: Copy> PdlNode<V> {
    pub fn key(&self) -> Timestamp {
        Timestamp(self.key.load(SeqCst))
    }

    /// Resolves a TBD key to the current clock value (at most once).
    pub fn stamp(&self, clock: &GlobalClock) -> Timestamp {
        let k = self.key();
        if k != Timestamp::TBD {
            return k;
        }
        match self.key.compare_exchange(Timestamp::TBD.0, clock.read().0, SeqCst, SeqCst) {
            Ok(_) => self.key(),
            Err(v) => Timestamp(v),
        }
    }

    pub fn val(&self) -> V {
        self.val
    }

    pub fn is_marked(&self) -> bool {
        self.mark.load(SeqCst)
    }

    pub fn left(&self) -> Option<Gc<PdlNode<V>>> {
        self.left.load(SeqCst)
    }

    pub fn right(&self) -> Option<Gc<PdlNode<V>>> {
        self.right.load(SeqCst)
    }

    /// Append index: 0 for the sentinel, predecessor + 1 otherwise.
    pub fn seq(&self) -> u64 {
        self.seq.load(Relaxed)
    }
}

/// Raw copy of a node's mutable fields, for rewinding in the explorer.
#[doc(hidden)]
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct PdlImage<V> {
    key: i64,
    mark: bool,
    left: Option<Gc<PdlNode<V>>>,
    right: Option<Gc<PdlNode<V>>>,
    seq: u64,
}

impl<V> Clone for PdlImage<V> {
    fn clone(&self) -> Self {
        PdlImage { key: self.key, mark: self.mark, left: self.left, right: self.right, seq: self.seq }
    }
}

impl<V> PdlNode<V> {
    #[doc(hidden)]
    pub fn image(&self) -> PdlImage<V> {
        PdlImage {
            key: self.key.load(SeqCst),
            mark: self.mark.load(SeqCst),
            left: self.left.load(SeqCst),
            right: self.right.load(SeqCst),
            seq: self.seq.load(SeqCst),
        }
    }

    #[doc(hidden)]
    pub fn restore(&self, img: &PdlImage<V>) {
        self.key.store(img.key, SeqCst);
        self.mark.store(img.mark, SeqCst);
        self.left.store(img.left, SeqCst);
        self.right.store(img.right, SeqCst);
        self.seq.store(img.seq, SeqCst);
    }
}

pub struct PdlList<V> {
    head: AtomicGc<PdlNode<V>>,
    sentinel: Gc<PdlNode<V>>,
}

unsafe impl<V: Trace> Trace for PdlList<V> {
    fn trace(&self, t: &mut Tracer) {
        self.head.trace(t);
        self.sentinel.trace(t);
    }
}

impl<V: Copy + Trace + Send + Sync + 'static> PdlList<V> {
    pub fn new(heap: &Heap, bottom: V) -> Self {
        let sentinel = Self::node(heap, Timestamp::NEG_INF, bottom);
        PdlList { head: AtomicGc::new(Some(sentinel)), sentinel }
    }

    /// A fresh, unlinked node.
    pub fn node(heap: &Heap, key: Timestamp, val: V) -> Gc<PdlNode<V>> {
        heap.alloc(PdlNode {
            key: AtomicI64::new(key.0),
            val,
            mark: AtomicBool::new(false),
            left: AtomicGc::null(),
            right: AtomicGc::null(),
            seq: AtomicU64::new(0),
        })
    }
}

impl<V: Copy> PdlList<V> {
    pub fn head(&self) -> Gc<PdlNode<V>> {
        self.head.load(SeqCst).expect("head is never null")
    }

    pub fn sentinel(&self) -> Gc<PdlNode<V>> {
        self.sentinel
    }

    pub fn peek_head(&self) -> V {
        self.head().val
    }

    pub fn search(&self, k: Timestamp) -> V {
        self.search_node(k).val
    }

    /// First node reachable from head with key ≤ `k`.
    pub fn search_node(&self, k: Timestamp) -> Gc<PdlNode<V>> {
        let mut x = self.head();
        while x.key() > k {
            x = x.left().expect("walk ends at the sentinel");
        }
        x
    }

    pub fn try_append(&self, x: Gc<PdlNode<V>>, y: Gc<PdlNode<V>>) -> bool {
        let mut op = TryAppendOp::new(x, y);
        loop {
            if let Some(r) = op.step(self) {
                return r;
            }
        }
    }

    /// Unlinks `x`; returns the length of the marked chain it walked.
    ///
    /// `x` must have been appended after, must not be the head, and may be
    /// removed only once. Violations are caught in debug builds only.
    pub fn remove(&self, x: Gc<PdlNode<V>>) -> u64 {
        debug_assert!(x != self.head(), "remove of the head node");
        debug_assert!(x != self.sentinel, "remove of the sentinel");
        debug_assert!(!x.is_marked(), "node removed twice");
        remove_node(x)
    }

    #[doc(hidden)]
    pub fn set_head(&self, h: Gc<PdlNode<V>>) {
        self.head.store(Some(h), SeqCst);
    }

    /// Nodes reached from head via left links, newest first.
    pub fn abstract_list(&self) -> Vec<Gc<PdlNode<V>>> {
        let mut out = vec![self.head()];
        while let Some(l) = out.last().unwrap().left() {
            out.push(l);
        }
        out
    }
}

/// Unlinks `x` from the list it was appended to; returns the marked-chain
/// length walked. Same preconditions as [`PdlList::remove`].
pub fn remove_node<V: Copy>(x: Gc<PdlNode<V>>) -> u64 {
    let mut op = RemoveOp::new(x);
    while !op.step() {}
    op.chain()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum AppendPc {
    ReadLeft,
    HelpRight,
    InitLeft,
    CasHead,
    SetRight,
    Done,
}

/// `try_append(x, y)` with one shared-memory access per step.
#[derive(PartialEq, Eq, Hash)]
pub struct TryAppendOp<V> {
    x: Gc<PdlNode<V>>,
    y: Gc<PdlNode<V>>,
    w: Option<Gc<PdlNode<V>>>,
    pc: AppendPc,
    result: Option<bool>,
}

impl<V> Clone for TryAppendOp<V> {
    fn clone(&self) -> Self {
        TryAppendOp { x: self.x, y: self.y, w: self.w, pc: self.pc, result: self.result }
    }
}

impl<V: Copy> TryAppendOp<V> {
    pub fn new(x: Gc<PdlNode<V>>, y: Gc<PdlNode<V>>) -> Self {
        TryAppendOp { x, y, w: None, pc: AppendPc::ReadLeft, result: None }
    }

    pub fn is_done(&self) -> bool {
        self.pc == AppendPc::Done
    }

    pub fn result(&self) -> Option<bool> {
        self.result
    }

    pub fn step(&mut self, list: &PdlList<V>) -> Option<bool> {
        match self.pc {
            AppendPc::ReadLeft => {
                self.w = self.x.left();
                self.pc = if self.w.is_some() { AppendPc::HelpRight } else { AppendPc::InitLeft };
            }
            AppendPc::HelpRight => {
                let w = self.w.unwrap();
                let _ = w.right.compare_exchange(None, Some(self.x));
                self.pc = AppendPc::InitLeft;
            }
            AppendPc::InitLeft => {
                self.y.left.store(Some(self.x), SeqCst);
                self.y.seq.store(self.x.seq() + 1, Relaxed);
                self.pc = AppendPc::CasHead;
            }
            AppendPc::CasHead => {
                if list.head.compare_exchange(Some(self.x), Some(self.y)).is_ok() {
                    self.pc = AppendPc::SetRight;
                } else {
                    self.finish(false);
                }
            }
            AppendPc::SetRight => {
                let _ = self.x.right.compare_exchange(None, Some(self.y));
                self.finish(true);
            }
            AppendPc::Done => {}
        }
        self.result
    }

    fn finish(&mut self, r: bool) {
        self.result = Some(r);
        self.pc = AppendPc::Done;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum RemovePc {
    Mark,
    FirstLeft,
    FirstRight,
    CheckLeft,
    AdvanceLeft,
    CheckRight,
    AdvanceRight,
    ReadRightLeft,
    ReadLeftRight,
    TestLeft,
    TestRight,
    CasLeft,
    CasRight,
    Done,
}

/// Outcome of a successful left-link CAS, exposed for invariant checks.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct LeftSwing<V> {
    pub node: Gc<PdlNode<V>>,
    pub old: Gc<PdlNode<V>>,
    pub new: Gc<PdlNode<V>>,
}

impl<V> Clone for LeftSwing<V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for LeftSwing<V> {}

/// `remove(x)` with one shared-memory access per step.
#[derive(PartialEq, Eq, Hash)]
pub struct RemoveOp<V> {
    x: Gc<PdlNode<V>>,
    left: Option<Gc<PdlNode<V>>>,
    right: Option<Gc<PdlNode<V>>>,
    right_left: Option<Gc<PdlNode<V>>>,
    left_right: Option<Gc<PdlNode<V>>>,
    pc: RemovePc,
    chain: u64,
    last_swing: Option<LeftSwing<V>>,
}

impl<V> Clone for RemoveOp<V> {
    fn clone(&self) -> Self {
        RemoveOp {
            x: self.x,
            left: self.left,
            right: self.right,
            right_left: self.right_left,
            left_right: self.left_right,
            pc: self.pc,
            chain: self.chain,
            last_swing: self.last_swing,
        }
    }
}

impl<V: Copy> RemoveOp<V> {
    pub fn new(x: Gc<PdlNode<V>>) -> Self {
        RemoveOp {
            x,
            left: None,
            right: None,
            right_left: None,
            left_right: None,
            pc: RemovePc::Mark,
            chain: 1,
            last_swing: None,
        }
    }

    pub fn is_done(&self) -> bool {
        self.pc == RemovePc::Done
    }

    /// 1 + the number of marked neighbours walked past.
    pub fn chain(&self) -> u64 {
        self.chain
    }

    /// The local `left`/`right` frontier, once read.
    pub fn frontier(&self) -> Option<(Gc<PdlNode<V>>, Gc<PdlNode<V>>)> {
        Some((self.left?, self.right?))
    }

    /// Takes the left-link CAS performed by the last step, if any.
    pub fn take_swing(&mut self) -> Option<LeftSwing<V>> {
        self.last_swing.take()
    }

    fn l(&self) -> Gc<PdlNode<V>> {
        self.left.expect("left frontier set")
    }

    fn r(&self) -> Gc<PdlNode<V>> {
        self.right.expect("right frontier set")
    }

    /// Executes one step; true once the remove has returned.
    pub fn step(&mut self) -> bool {
        use RemovePc::*;
        self.pc = match self.pc {
            Mark => {
                self.x.mark.store(true, SeqCst);
                FirstLeft
            }
            FirstLeft => {
                self.left = self.x.left();
                FirstRight
            }
            FirstRight => {
                self.right = self.x.right();
                CheckLeft
            }
            CheckLeft => {
                if self.l().is_marked() {
                    AdvanceLeft
                } else {
                    CheckRight
                }
            }
            AdvanceLeft => {
                self.left = self.l().left();
                self.chain += 1;
                CheckLeft
            }
            CheckRight => {
                if self.r().is_marked() {
                    AdvanceRight
                } else {
                    ReadRightLeft
                }
            }
            AdvanceRight => {
                self.right = self.r().right();
                self.chain += 1;
                CheckRight
            }
            ReadRightLeft => {
                self.right_left = self.r().left();
                ReadLeftRight
            }
            ReadLeftRight => {
                self.left_right = self.l().right();
                TestLeft
            }
            TestLeft => {
                if self.l().is_marked() {
                    CheckLeft
                } else {
                    TestRight
                }
            }
            TestRight => {
                if self.r().is_marked() {
                    CheckLeft
                } else {
                    CasLeft
                }
            }
            CasLeft => {
                let (l, r) = (self.l(), self.r());
                if r.left.compare_exchange(self.right_left, Some(l)).is_ok() {
                    if let Some(old) = self.right_left {
                        self.last_swing = Some(LeftSwing { node: r, old, new: l });
                    }
                    CasRight
                } else {
                    CheckLeft
                }
            }
            CasRight => {
                let (l, r) = (self.l(), self.r());
                if l.right.compare_exchange(self.left_right, Some(r)).is_ok() {
                    Done
                } else {
                    CheckLeft
                }
            }
            Done => Done,
        };
        self.pc == Done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list_with(heap: &Heap, keys: &[i64]) -> (PdlList<u64>, Vec<Gc<PdlNode<u64>>>) {
        let list = PdlList::new(heap, 0);
        let mut nodes = vec![];
        for &k in keys {
            let y = PdlList::node(heap, Timestamp(k), k as u64);
            assert!(list.try_append(list.head(), y));
            nodes.push(y);
        }
        (list, nodes)
    }

    fn keys(list: &PdlList<u64>) -> Vec<i64> {
        list.abstract_list().iter().map(|n| n.key().0).collect()
    }

    #[test]
    fn fresh_list_peeks_bottom() {
        let heap = Heap::new();
        let list = PdlList::new(&heap, 42u64);
        assert_eq!(list.peek_head(), 42);
        assert_eq!(list.head(), list.sentinel());
        assert!(list.sentinel().left().is_none());
    }

    #[test]
    fn append_links_both_ways() {
        let heap = Heap::new();
        let list = PdlList::new(&heap, 0u64);
        let s = list.sentinel();
        let y = PdlList::node(&heap, Timestamp(1), 7);
        assert!(list.try_append(s, y));
        assert_eq!(list.head(), y);
        assert_eq!(y.left(), Some(s));
        assert_eq!(s.right(), Some(y));
        assert_eq!(y.seq(), 1);
        let z = PdlList::node(&heap, Timestamp(2), 8);
        assert!(!list.try_append(s, z));
        assert_eq!(list.head(), y);
    }

    #[test]
    fn search_floor() {
        let heap = Heap::new();
        let (list, _) = list_with(&heap, &[3, 8]);
        assert_eq!(list.search(Timestamp(5)), 3);
        assert_eq!(list.search(Timestamp(8)), 8);
        assert_eq!(list.search(Timestamp(0)), 0);
    }

    #[test]
    fn remove_middle() {
        let heap = Heap::new();
        let (list, n) = list_with(&heap, &[1, 2, 3]);
        let (a, b, c) = (n[0], n[1], n[2]);
        assert_eq!(list.remove(b), 1);
        assert_eq!(keys(&list), vec![3, 1, i64::MIN]);
        assert_eq!(c.left(), Some(a));
        assert_eq!(a.right(), Some(c));
    }

    #[test]
    fn remove_reports_chain() {
        let heap = Heap::new();
        let (list, n) = list_with(&heap, &[1, 2, 3, 4]);
        // mark 2 without unlinking it, then remove 3: walks past 2
        n[1].mark.store(true, SeqCst);
        assert_eq!(list.remove(n[2]), 2);
        assert_eq!(keys(&list), vec![4, 1, i64::MIN]);
    }

    #[test]
    fn append_helps_missing_right_link() {
        let heap = Heap::new();
        let list = PdlList::new(&heap, 0u64);
        let s = list.sentinel();
        let x = PdlList::node(&heap, Timestamp(1), 1);
        let mut op = TryAppendOp::new(s, x);
        while op.pc != AppendPc::SetRight {
            op.step(&list);
        }
        assert!(s.right().is_none());
        let y = PdlList::node(&heap, Timestamp(2), 2);
        let mut op2 = TryAppendOp::new(x, y);
        op2.step(&list);
        op2.step(&list);
        assert_eq!(s.right(), Some(x));
        assert!(op2.step(&list).is_none());
        assert!(op2.step(&list).is_none());
        assert_eq!(op2.step(&list), Some(true));
    }

    #[test]
    fn stamp_resolves_tbd_once() {
        let heap = Heap::new();
        let clock = GlobalClock::starting_at(Timestamp(9));
        let n = PdlList::node(&heap, Timestamp::TBD, 0u64);
        assert_eq!(n.stamp(&clock), Timestamp(9));
        clock.tick(&mut Default::default());
        assert_eq!(n.stamp(&clock), Timestamp(9));
    }
}
