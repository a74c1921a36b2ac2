//! Multiversion data structures built from [`VersionCell`](crate::VersionCell)s.

pub mod bst;
pub mod hash;

pub use bst::MvBst;
pub use hash::MvHashMap;

use crate::heap::{CollectStats, HeapStats};
use crate::oracle::check::CheckReport;
use crate::scheme::SchemeStats;

/// Version-list space measured with every worker stopped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpaceStats {
    /// Version cells reachable from the structure's roots.
    pub cells: usize,
    /// Non-sentinel version nodes reachable from those cells.
    pub version_nodes: usize,
    /// Chains or tree nodes reachable through any version.
    pub structure_nodes: usize,
}

impl SpaceStats {
    pub fn avg_list_len(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.version_nodes as f64 / self.cells as f64
        }
    }
}

/// Operations one worker performs through its handle.
pub trait MapOps {
    /// Adds `k` if absent. Returns false, leaving the value alone, otherwise.
    fn insert(&mut self, k: u64, v: u64) -> bool;
    fn delete(&mut self, k: u64) -> bool;
    fn lookup(&mut self, k: u64) -> Option<u64>;
    /// Snapshot of all pairs with `a < key < a + s`, sorted by key.
    fn range_rtx(&mut self, a: u64, s: u64) -> Vec<(u64, u64)>;
}

/// A multiversion map shared by worker threads.
pub trait MvMap: Send + Sync {
    type Handle<'a>: MapOps
    where
        Self: 'a;

    /// A worker handle; claims one announcement slot until dropped.
    fn handle(&self) -> Self::Handle<'_>;
    fn scheme_stats(&self) -> SchemeStats;
    fn heap_stats(&self) -> HeapStats;
    /// Read-only stop-the-world traversal of every reachable version.
    fn space(&mut self) -> SpaceStats;
    /// (cell id, append index) of every reachable version.
    fn version_ids(&mut self) -> Vec<(u64, u64)>;
    /// Completes pending reclamation (tracker flush, EBR advances).
    fn drain(&mut self);
    /// Overwrites every reachable cell with its own value, rescanning the
    /// board for each write. Clears Steam+LF's dusty corners.
    fn overwrite_pass(&mut self);
    /// Frees unreachable nodes.
    fn collect(&mut self) -> CollectStats;
    /// Checks every logged rtx against the append log.
    fn check_snapshots(&self) -> CheckReport;
}

/// 64-bit finalizer with good avalanche behaviour.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}
