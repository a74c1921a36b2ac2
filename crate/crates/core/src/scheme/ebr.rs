//! Epoch bookkeeping for the EBR scheme.

use std::collections::VecDeque;
use std::mem;
use std::sync::atomic::{AtomicU64, Ordering::*};

use crossbeam_utils::CachePadded;
use parking_lot::Mutex;

use super::CellRef;
use crate::heap::{Trace, Tracer};
use crate::ts::Timestamp;

const UNPINNED: u64 = u64::MAX;

struct Bag<V> {
    epoch: u64,
    items: Vec<(CellRef<V>, Timestamp)>,
}

pub(crate) struct Ebr<V> {
    global: CachePadded<AtomicU64>,
    pinned: Box<[CachePadded<AtomicU64>]>,
    bags: Box<[CachePadded<Mutex<VecDeque<Bag<V>>>>]>,
}

impl<V> Ebr<V> {
    pub(crate) fn new(slots: usize) -> Self {
        Ebr {
            global: CachePadded::new(AtomicU64::new(0)),
            pinned: (0..slots).map(|_| CachePadded::new(AtomicU64::new(UNPINNED))).collect(),
            bags: (0..slots).map(|_| CachePadded::new(Mutex::new(VecDeque::new()))).collect(),
        }
    }

    pub(crate) fn epoch(&self) -> u64 {
        self.global.load(SeqCst)
    }

    pub(crate) fn pin(&self, slot: usize) {
        loop {
            let g = self.global.load(SeqCst);
            self.pinned[slot].store(g, SeqCst);
            if self.global.load(SeqCst) == g {
                return;
            }
        }
    }

    pub(crate) fn unpin(&self, slot: usize) {
        self.pinned[slot].store(UNPINNED, SeqCst);
    }

    /// Advances the epoch if every pinned slot has seen the current one.
    pub(crate) fn try_advance(&self) -> bool {
        let g = self.global.load(SeqCst);
        if self.pinned.iter().any(|p| {
            let e = p.load(SeqCst);
            e != UNPINNED && e != g
        }) {
            return false;
        }
        self.global.compare_exchange(g, g + 1, SeqCst, SeqCst).is_ok()
    }

    /// Retires the versions of `cell` superseded at or before `hi`.
    pub(crate) fn retire(&self, slot: usize, cell: CellRef<V>, hi: Timestamp) {
        let e = self.global.load(SeqCst);
        let mut bags = self.bags[slot].lock();
        match bags.back_mut() {
            Some(b) if b.epoch == e => b.items.push((cell, hi)),
            _ => bags.push_back(Bag { epoch: e, items: vec![(cell, hi)] }),
        }
    }

    /// Takes the items of `slot` retired at least two epochs ago.
    pub(crate) fn expired(&self, slot: usize) -> Vec<(CellRef<V>, Timestamp)> {
        let g = self.global.load(SeqCst);
        let mut bags = self.bags[slot].lock();
        let mut out = Vec::new();
        while bags.front().is_some_and(|b| b.epoch + 2 <= g) {
            out.append(&mut bags.pop_front().unwrap().items);
        }
        out
    }

    /// Two unconditional advances followed by taking every bag. Requires
    /// that nothing is pinned, which `&mut self` guarantees.
    pub(crate) fn force_drain(&mut self) -> Vec<(CellRef<V>, Timestamp)> {
        *self.global.get_mut() += 2;
        self.bags.iter_mut().flat_map(|b| mem::take(b.get_mut()).into_iter().flat_map(|b| b.items)).collect()
    }

    pub(crate) fn pending(&self) -> usize {
        self.bags.iter().map(|b| b.lock().iter().map(|b| b.items.len()).sum::<usize>()).sum()
    }

    /// Epochs between the current one and the oldest unreclaimed bag.
    pub(crate) fn lag(&self) -> u64 {
        let g = self.epoch();
        self.bags.iter().filter_map(|b| b.lock().front().map(|b| g - b.epoch)).max().unwrap_or(0)
    }
}

unsafe impl<V> Trace for Ebr<V> {
    fn trace(&self, t: &mut Tracer) {
        for bags in self.bags.iter() {
            for b in bags.lock().iter() {
                for (cell, _) in &b.items {
                    cell.trace(t);
                }
            }
        }
    }
}
