//! Append and rtx logs used to reconstruct what every snapshot should see.

use std::collections::HashMap;

use parking_lot::Mutex;

use crate::ts::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AppendRecord {
    pub cell: u64,
    pub seq: u64,
    pub ts: Timestamp,
    pub fp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtxRecord {
    pub t: Timestamp,
    /// `(cell, fingerprint)` of every value the rtx returned.
    pub reads: Vec<(u64, u64)>,
}

/// Per-slot append and rtx logs.
pub struct ShadowLog {
    appends: Box<[Mutex<Vec<AppendRecord>>]>,
    rtxs: Box<[Mutex<Vec<RtxRecord>>]>,
}

impl ShadowLog {
    pub fn new(slots: usize) -> Self {
        ShadowLog {
            appends: (0..slots).map(|_| Mutex::new(Vec::new())).collect(),
            rtxs: (0..slots).map(|_| Mutex::new(Vec::new())).collect(),
        }
    }

    pub fn append(&self, slot: usize, rec: AppendRecord) {
        self.appends[slot % self.appends.len()].lock().push(rec);
    }

    pub fn rtx(&self, slot: usize, rec: RtxRecord) {
        self.rtxs[slot % self.rtxs.len()].lock().push(rec);
    }

    pub fn append_count(&self) -> usize {
        self.appends.iter().map(|a| a.lock().len()).sum()
    }

    pub fn rtx_records(&self) -> Vec<RtxRecord> {
        self.rtxs.iter().flat_map(|r| r.lock().clone()).collect()
    }

    /// Per-cell histories ordered by append index.
    pub fn histories(&self) -> History {
        let mut cells: HashMap<u64, Vec<(u64, Timestamp, u64)>> = HashMap::new();
        for a in self.appends.iter() {
            for r in a.lock().iter() {
                cells.entry(r.cell).or_default().push((r.seq, r.ts, r.fp));
            }
        }
        for h in cells.values_mut() {
            h.sort_unstable();
        }
        History { cells }
    }
}

/// Append histories keyed by cell.
pub struct History {
    cells: HashMap<u64, Vec<(u64, Timestamp, u64)>>,
}

impl History {
    pub fn cells(&self) -> usize {
        self.cells.len()
    }

    /// Fingerprint of the last append to `cell` with ts ≤ `t`.
    pub fn value_at(&self, cell: u64, t: Timestamp) -> Option<u64> {
        let h = self.cells.get(&cell)?;
        // stamps are non-decreasing in append order
        let n = h.partition_point(|e| e.1 <= t);
        n.checked_sub(1).map(|i| h[i].2)
    }

    /// Whether appends to every cell carry non-decreasing stamps and
    /// contiguous append indices.
    pub fn well_formed(&self) -> Result<(), String> {
        for (cell, h) in &self.cells {
            for (i, w) in h.windows(2).enumerate() {
                if w[1].0 != w[0].0 + 1 {
                    return Err(format!("cell {cell}: gap after append {}", h[i].0));
                }
                if w[1].1 < w[0].1 {
                    return Err(format!("cell {cell}: stamp {:?} after {:?}", w[1].1, w[0].1));
                }
            }
        }
        Ok(())
    }
}
