//! Range tracking: deprecated items wait in batches until no announced
//! timestamp can fall inside their `[lo, hi)` interval.

use std::mem;
use std::sync::atomic::{AtomicUsize, Ordering::*};
use std::sync::Arc;

use crossbeam_queue::SegQueue;
use crossbeam_utils::CachePadded;
use parking_lot::Mutex;

use crate::heap::{Trace, Tracer};
use crate::ts::{AnnScan, TimeBase, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeprecatedItem<T> {
    pub handle: T,
    pub lo: Timestamp,
    pub hi: Timestamp,
}

impl<T> DeprecatedItem<T> {
    fn expired(&self, scan: &AnnScan) -> bool {
        scan.expires(self.lo, self.hi)
    }
}

unsafe impl<T: Trace> Trace for DeprecatedItem<T> {
    fn trace(&self, t: &mut Tracer) {
        self.handle.trace(t)
    }
}

#[derive(Debug)]
struct Batch<T> {
    /// Sorted by `hi`, largest first.
    items: Vec<DeprecatedItem<T>>,
}

pub struct RangeTracker<T> {
    time: Arc<TimeBase>,
    threshold: usize,
    local: Box<[CachePadded<Mutex<Vec<DeprecatedItem<T>>>>]>,
    queue: SegQueue<Batch<T>>,
    queued: AtomicUsize,
    pops: AtomicUsize,
}

impl<T: Copy> RangeTracker<T> {
    /// One local batch per board slot; `threshold` defaults to 4 × slots.
    pub fn new(time: Arc<TimeBase>, threshold: Option<usize>) -> Self {
        let p = time.board.len();
        RangeTracker {
            threshold: threshold.unwrap_or(4 * p).max(1),
            local: (0..p).map(|_| CachePadded::new(Mutex::new(Vec::new()))).collect(),
            queue: SegQueue::new(),
            queued: AtomicUsize::new(0),
            pops: AtomicUsize::new(0),
            time,
        }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Items held in local batches or the queue.
    pub fn retained(&self) -> usize {
        self.queued.load(Relaxed) + self.local.iter().map(|l| l.lock().len()).sum::<usize>()
    }

    fn push(&self, mut items: Vec<DeprecatedItem<T>>) {
        if items.is_empty() {
            return;
        }
        items.sort_by_key(|it| std::cmp::Reverse(it.hi));
        self.queued.fetch_add(items.len(), Relaxed);
        self.queue.push(Batch { items });
    }

    fn pop(&self) -> Option<Batch<T>> {
        let b = self.queue.pop()?;
        self.queued.fetch_sub(b.items.len(), Relaxed);
        Some(b)
    }

    /// Adds `item` to `slot`'s batch and returns items that became safe.
    ///
    /// `slot` identifies the caller's local batch; concurrent callers should
    /// use distinct slots to avoid lock traffic.
    pub fn deprecate(&self, slot: usize, item: DeprecatedItem<T>) -> Vec<DeprecatedItem<T>> {
        debug_assert!(item.lo <= item.hi);
        let mut batch = {
            let mut local = self.local[slot].lock();
            local.push(item);
            if local.len() < self.threshold {
                return Vec::new();
            }
            mem::take(&mut *local)
        };
        let installed = self.time.installed();
        let mut out = Vec::new();
        batch.retain(|it| {
            let e = it.expired(&installed);
            if e {
                out.push(*it);
            }
            !e
        });
        self.push(batch);

        let k = 1 + self.pops.fetch_add(1, Relaxed) % 2;
        let popped: Vec<_> = (0..k).map_while(|_| self.pop()).collect();
        if popped.is_empty() {
            return out;
        }
        let scan = self.time.scan_announce();
        let mut keep = Vec::new();
        for it in popped.into_iter().flat_map(|b| b.items) {
            if it.expired(&scan) {
                out.push(it);
            } else {
                keep.push(it);
            }
        }
        self.push(keep);
        out
    }

    /// Drains every local batch and the queue against one fresh scan.
    pub fn flush_all(&mut self) -> Vec<DeprecatedItem<T>> {
        let mut all: Vec<_> = self.local.iter_mut().flat_map(|l| mem::take(l.get_mut())).collect();
        while let Some(b) = self.pop() {
            all.extend(b.items);
        }
        let scan = self.time.scan_announce();
        let (out, keep): (Vec<_>, Vec<_>) = all.into_iter().partition(|it| it.expired(&scan));
        self.push(keep);
        out
    }
}

unsafe impl<T: Copy + Trace> Trace for RangeTracker<T> {
    /// Only sound while no other thread touches the tracker.
    fn trace(&self, t: &mut Tracer) {
        for l in self.local.iter() {
            l.lock().trace(t);
        }
        let mut batches = Vec::new();
        while let Some(b) = self.queue.pop() {
            batches.push(b);
        }
        for b in batches {
            b.items.trace(t);
            self.queue.push(b);
        }
    }
}
