//! Versioned CAS cells, read transactions, and the four reclamation schemes.
//!
//! A [`Runtime`] owns the node heap, the clock and the scheme state. Worker
//! threads operate through a [`Participant`], which owns one announcement
//! slot. Cells live inside data structures and are reached by the runtime
//! only through [`CellRef`]s handed to [`Participant::cas`].

mod ebr;

use std::fmt;
use std::ptr::NonNull;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering::*};
use std::sync::Arc;
use std::time::Duration;

use crossbeam_utils::CachePadded;

use crate::heap::{CollectStats, Gc, GcAny, Heap, Trace, Tracer};
use crate::oracle::shadow::{AppendRecord, RtxRecord, ShadowLog};
use crate::pdl::{self, PdlList, PdlNode};
use crate::ssl::SslList;
use crate::tracker::{DeprecatedItem, RangeTracker};
use crate::ts::{AnnScan, Backoff, TimeBase, Timestamp};
use crate::Payload;
use ebr::Ebr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Epoch-based: versions overwritten two epochs ago are spliced out.
    Ebr,
    /// Compacts the written list on every update with a scan cached for ~1ms.
    #[serde(rename = "steam")]
    SteamLf,
    /// Range tracker feeding individual PDL removes.
    #[serde(rename = "dlrt")]
    DlRt,
    /// Range tracker feeding SSL compactions.
    #[serde(rename = "slrt")]
    SlRt,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Ebr, SchemeKind::SteamLf, SchemeKind::DlRt, SchemeKind::SlRt];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ebr => "ebr",
            SchemeKind::SteamLf => "steam",
            SchemeKind::DlRt => "dlrt",
            SchemeKind::SlRt => "slrt",
        }
    }

    pub fn uses_pdl(self) -> bool {
        self == SchemeKind::DlRt
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "ebr" => Ok(SchemeKind::Ebr),
            "steam" | "steamlf" => Ok(SchemeKind::SteamLf),
            "dlrt" => Ok(SchemeKind::DlRt),
            "slrt" => Ok(SchemeKind::SlRt),
            _ => Err(format!("unknown scheme '{s}' (expected ebr, steam, dlrt or slrt)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Announcement slots, i.e. the most participants alive at once.
    pub participants: usize,
    /// Range tracker batch size; `None` means 4 × participants.
    pub tracker_threshold: Option<usize>,
    /// Age after which Steam+LF rescans the board.
    pub steam_scan_interval: Duration,
    /// Operations per worker between EBR epoch advance attempts.
    pub ebr_advance_every: u32,
    /// Log appends and rtx reads for the snapshot checker. Has no effect
    /// unless the `verify` feature is enabled.
    pub shadow_log: bool,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, participants: usize) -> Self {
        SchemeConfig {
            kind,
            participants,
            tracker_threshold: None,
            steam_scan_interval: Duration::from_millis(1),
            ebr_advance_every: 128,
            shadow_log: true,
        }
    }
}

pub enum CellList<V> {
    Ssl(SslList<V>),
    Pdl(PdlList<V>),
}

/// A CAS object that remembers its older values.
pub struct VersionCell<V> {
    id: u64,
    list: CellList<V>,
}

unsafe impl<V: Trace> Trace for VersionCell<V> {
    fn trace(&self, t: &mut Tracer) {
        match &self.list {
            CellList::Ssl(l) => l.trace(t),
            CellList::Pdl(l) => l.trace(t),
        }
    }
}

impl<V: Payload> VersionCell<V> {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn list(&self) -> &CellList<V> {
        &self.list
    }

    pub fn ssl(&self) -> Option<&SslList<V>> {
        match &self.list {
            CellList::Ssl(l) => Some(l),
            CellList::Pdl(_) => None,
        }
    }

    pub fn pdl(&self) -> Option<&PdlList<V>> {
        match &self.list {
            CellList::Pdl(l) => Some(l),
            CellList::Ssl(_) => None,
        }
    }

    /// Current value, without stamping. Use [`Participant::peek`] inside
    /// operations.
    pub fn current(&self) -> V {
        match &self.list {
            CellList::Ssl(l) => l.peek_head(),
            CellList::Pdl(l) => l.peek_head(),
        }
    }

    /// Calls `f(ts, value, append index)` for every reachable version,
    /// newest first, excluding the sentinel.
    pub fn for_each_version(&self, mut f: impl FnMut(Timestamp, V, u64)) {
        match &self.list {
            CellList::Ssl(l) => {
                let mut x = l.head();
                while let Some(next) = x.left() {
                    f(x.ts(), x.val(), x.seq());
                    x = next;
                }
            }
            CellList::Pdl(l) => {
                let mut x = l.head();
                while let Some(next) = x.left() {
                    f(x.key(), x.val(), x.seq());
                    x = next;
                }
            }
        }
    }

    /// Reachable versions, sentinel excluded.
    pub fn version_count(&self) -> usize {
        let mut n = 0;
        self.for_each_version(|_, _, _| n += 1);
        n
    }
}

/// A reference to a cell that the runtime may keep past the current call.
pub struct CellRef<V> {
    cell: NonNull<VersionCell<V>>,
    owner: Option<GcAny>,
}

impl<V> Clone for CellRef<V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for CellRef<V> {}

impl<V> PartialEq for CellRef<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cell == other.cell
    }
}

impl<V> Eq for CellRef<V> {}

impl<V> fmt::Debug for CellRef<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellRef({:p})", self.cell)
    }
}

unsafe impl<V: Send + Sync> Send for CellRef<V> {}
unsafe impl<V: Send + Sync> Sync for CellRef<V> {}

impl<V> CellRef<V> {
    /// A reference to a cell that is not inside a heap object.
    ///
    /// # Safety
    ///
    /// The cell must not move or be dropped before the runtime it is passed
    /// to (and every structure that runtime serves).
    pub unsafe fn unowned(cell: &VersionCell<V>) -> Self {
        CellRef { cell: NonNull::from(cell), owner: None }
    }

    /// A reference to a cell embedded in a heap object, keeping it alive.
    pub fn owned<T>(owner: Gc<T>, project: fn(&T) -> &VersionCell<V>) -> Self {
        CellRef { cell: NonNull::from(project(&owner)), owner: Some(owner.erase()) }
    }

    pub fn get(&self) -> &VersionCell<V> {
        unsafe { self.cell.as_ref() }
    }

    fn addr(&self) -> usize {
        self.cell.as_ptr() as usize
    }
}

unsafe impl<V> Trace for CellRef<V> {
    fn trace(&self, t: &mut Tracer) {
        // Unowned cells are roots of their structure.
        self.owner.trace(t)
    }
}

/// What the range tracker holds for each superseded version.
enum Retired<V> {
    Node(Gc<PdlNode<V>>),
    Cell(CellRef<V>),
}

impl<V> Clone for Retired<V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for Retired<V> {}

unsafe impl<V> Trace for Retired<V> {
    fn trace(&self, t: &mut Tracer) {
        match self {
            Retired::Node(n) => t.mark(*n),
            Retired::Cell(c) => c.trace(t),
        }
    }
}

#[derive(Default)]
struct SlotStats {
    overwrites: AtomicU64,
    removes: AtomicU64,
    chain: AtomicU64,
    compacts: AtomicU64,
    traversed: AtomicU64,
    splices: AtomicU64,
}

/// Reclamation counters summed over all slots.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SchemeStats {
    pub overwrites: u64,
    pub removes: u64,
    /// Mean marked-chain length walked per PDL remove (0 if none).
    pub avg_chain_c: f64,
    pub compacts: u64,
    /// Mean list nodes visited per compaction (0 if none).
    pub avg_compact_traversal: f64,
    pub splices: u64,
    /// Items held by the range tracker or EBR limbo bags.
    pub retained_items: usize,
    pub epoch: u64,
    pub epoch_lag: u64,
}

pub struct Runtime<V: Payload> {
    heap: Heap,
    time: Arc<TimeBase>,
    config: SchemeConfig,
    tracker: Option<RangeTracker<Retired<V>>>,
    ebr: Ebr<V>,
    stats: Box<[CachePadded<SlotStats>]>,
    next_id: AtomicU64,
    log: ShadowLog,
}

impl<V: Payload> Runtime<V> {
    pub fn new(config: SchemeConfig) -> Self {
        let p = config.participants.max(1);
        let time = Arc::new(TimeBase::new(p));
        let tracker = matches!(config.kind, SchemeKind::DlRt | SchemeKind::SlRt)
            .then(|| RangeTracker::new(time.clone(), config.tracker_threshold));
        Runtime {
            heap: Heap::new(),
            tracker,
            ebr: Ebr::new(p),
            stats: (0..p).map(|_| CachePadded::new(SlotStats::default())).collect(),
            next_id: AtomicU64::new(1),
            log: ShadowLog::new(p),
            time,
            config,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.config.kind
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn time(&self) -> &Arc<TimeBase> {
        &self.time
    }

    /// Fresh process-unique identifier (cells and structure nodes).
    pub fn next_id(&self) -> u64 {
        self.next_id.fetch_add(1, Relaxed)
    }

    /// Whether appends and rtx reads are being logged.
    pub fn verifying(&self) -> bool {
        cfg!(feature = "verify") && self.config.shadow_log
    }

    pub fn shadow(&self) -> &ShadowLog {
        &self.log
    }

    /// A cell holding `initial`, stamped with the current clock value.
    pub fn new_cell(&self, initial: V) -> VersionCell<V> {
        let id = self.next_id();
        let ts = self.time.clock.read();
        let list = if self.config.kind.uses_pdl() {
            let l = PdlList::new(&self.heap, V::default());
            let y = PdlList::node(&self.heap, ts, initial);
            assert!(l.try_append(l.head(), y));
            CellList::Pdl(l)
        } else {
            let l = SslList::new(&self.heap, V::default());
            let y = SslList::node(&self.heap, ts, initial);
            assert!(l.try_append(l.head(), y));
            CellList::Ssl(l)
        };
        if self.verifying() {
            let fp0 = V::default().fingerprint();
            self.log.append(0, AppendRecord { cell: id, seq: 0, ts: Timestamp::NEG_INF, fp: fp0 });
            self.log.append(0, AppendRecord { cell: id, seq: 1, ts, fp: initial.fingerprint() });
        }
        VersionCell { id, list }
    }

    pub fn try_participant(&self) -> Option<Participant<'_, V>> {
        let slot = self.time.board.claim()?;
        Some(Participant {
            rt: self,
            slot,
            backoff: Backoff::default(),
            pins: 0,
            ops: 0,
            rtx: None,
            fresh_scans: false,
            reads: Vec::new(),
        })
    }

    /// Claims an announcement slot; panics if all are taken.
    pub fn participant(&self) -> Participant<'_, V> {
        self.try_participant().expect("all announcement slots are in use")
    }

    pub fn stats(&self) -> SchemeStats {
        let sum = |f: fn(&SlotStats) -> &AtomicU64| self.stats.iter().map(|s| f(s).load(Relaxed)).sum::<u64>();
        let removes = sum(|s| &s.removes);
        let compacts = sum(|s| &s.compacts);
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        SchemeStats {
            overwrites: sum(|s| &s.overwrites),
            removes,
            avg_chain_c: ratio(sum(|s| &s.chain), removes),
            compacts,
            avg_compact_traversal: ratio(sum(|s| &s.traversed), compacts),
            splices: sum(|s| &s.splices),
            retained_items: match self.config.kind {
                SchemeKind::Ebr => self.ebr.pending(),
                SchemeKind::SteamLf => 0,
                _ => self.tracker.as_ref().map_or(0, |t| t.retained()),
            },
            epoch: self.ebr.epoch(),
            epoch_lag: if self.config.kind == SchemeKind::Ebr { self.ebr.lag() } else { 0 },
        }
    }

    /// Completes all pending reclamation. Afterwards every cell whose
    /// superseded versions went through this runtime holds only its head,
    /// except under Steam+LF, which reclaims only on the next write.
    pub fn drain(&mut self) {
        match self.config.kind {
            SchemeKind::DlRt | SchemeKind::SlRt => {
                let items = self.tracker.as_mut().unwrap().flush_all();
                self.process_expired(0, items);
            }
            SchemeKind::Ebr => {
                for (cell, hi) in self.ebr.force_drain() {
                    self.compact_plain(0, cell.get(), hi);
                }
            }
            SchemeKind::SteamLf => {}
        }
    }

    /// Frees every heap object unreachable from `roots` and the scheme's
    /// own pending items.
    ///
    /// # Safety
    ///
    /// No handle obtained from this runtime's heap and unreachable from
    /// `roots` may be used afterwards.
    pub unsafe fn collect(&mut self, roots: &dyn Trace) -> CollectStats {
        let all = (roots, (&self.tracker, &self.ebr));
        unsafe { self.heap.collect(&all) }
    }

    fn record_compact(&self, slot: usize, st: crate::ssl::CompactStats) {
        let s = &self.stats[slot];
        s.compacts.fetch_add(1, Relaxed);
        s.traversed.fetch_add(st.traversed, Relaxed);
        s.splices.fetch_add(st.splices, Relaxed);
    }

    /// Compacts `list` against a consistent (installed scan, head) pair.
    fn compact_snapshot(&self, slot: usize, list: &SslList<V>, mut scan: Arc<AnnScan>) {
        let h = loop {
            let h = list.head();
            if self.time.is_installed(&scan) {
                break h;
            }
            scan = self.time.installed();
        };
        h.stamp(&self.time.clock);
        let st = list.compact(scan.announcements(), scan.t(), h);
        self.record_compact(slot, st);
    }

    /// Compaction with no announcements below `t`; used by EBR once every
    /// rtx that could read below `t` has finished.
    fn compact_plain(&self, slot: usize, cell: &VersionCell<V>, t: Timestamp) {
        let list = cell.ssl().expect("EBR cells are SSL lists");
        let h = list.head();
        h.stamp(&self.time.clock);
        let st = list.compact(&[], t, h);
        self.record_compact(slot, st);
    }

    fn process_expired(&self, slot: usize, items: Vec<DeprecatedItem<Retired<V>>>) {
        if items.is_empty() {
            return;
        }
        let mut cells = Vec::new();
        for it in items {
            match it.handle {
                Retired::Node(n) => {
                    let c = pdl::remove_node(n);
                    let s = &self.stats[slot];
                    s.removes.fetch_add(1, Relaxed);
                    s.chain.fetch_add(c, Relaxed);
                }
                Retired::Cell(c) => cells.push(c),
            }
        }
        cells.sort_unstable_by_key(|c| c.addr());
        cells.dedup();
        for c in cells {
            let list = c.get().ssl().expect("SL-RT cells are SSL lists");
            self.compact_snapshot(slot, list, self.time.installed());
        }
    }
}

/// A worker's handle on a runtime: owns one announcement slot.
pub struct Participant<'r, V: Payload> {
    rt: &'r Runtime<V>,
    slot: usize,
    backoff: Backoff,
    pins: u32,
    ops: u32,
    rtx: Option<Timestamp>,
    fresh_scans: bool,
    reads: Vec<(u64, u64)>,
}

impl<'r, V: Payload> Participant<'r, V> {
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn runtime(&self) -> &'r Runtime<V> {
        self.rt
    }

    /// Makes Steam+LF rescan the board on every compaction instead of
    /// reusing a recent scan.
    pub fn set_fresh_scans(&mut self, on: bool) {
        self.fresh_scans = on;
    }

    /// Marks the start of a data-structure operation (EBR pins an epoch).
    pub fn begin_op(&mut self) {
        if self.rt.config.kind == SchemeKind::Ebr {
            if self.pins == 0 {
                self.rt.ebr.pin(self.slot);
            }
            self.pins += 1;
        }
    }

    pub fn end_op(&mut self) {
        if self.rt.config.kind != SchemeKind::Ebr || self.pins == 0 {
            return;
        }
        self.pins -= 1;
        if self.pins > 0 {
            return;
        }
        let ebr = &self.rt.ebr;
        ebr.unpin(self.slot);
        self.ops += 1;
        if self.ops.is_multiple_of(self.rt.config.ebr_advance_every.max(1)) {
            ebr.try_advance();
        }
        for (cell, hi) in ebr.expired(self.slot) {
            self.rt.compact_plain(self.slot, cell.get(), hi);
        }
    }

    /// The cell's current value. Stamps the head first so that the value is
    /// never newer than what a later rtx can see.
    pub fn peek(&mut self, cell: &VersionCell<V>) -> V {
        let clock = &self.rt.time.clock;
        match &cell.list {
            CellList::Ssl(l) => {
                let h = l.head();
                h.stamp(clock);
                h.val()
            }
            CellList::Pdl(l) => {
                let h = l.head();
                h.stamp(clock);
                h.val()
            }
        }
    }

    /// Installs `new` if the cell currently holds `expected`.
    pub fn cas(&mut self, cell: CellRef<V>, expected: V, new: V) -> bool {
        let rt = self.rt;
        let clock = &rt.time.clock;
        let (old, lo, hi, seq) = match &cell.get().list {
            CellList::Ssl(l) => {
                let x = l.head();
                let lo = x.stamp(clock);
                if x.val() != expected {
                    return false;
                }
                let y = SslList::node(&rt.heap, Timestamp::TBD, new);
                if !l.try_append(x, y) {
                    return false;
                }
                (None, lo, y.stamp(clock), y.seq())
            }
            CellList::Pdl(l) => {
                let x = l.head();
                let lo = x.stamp(clock);
                if x.val() != expected {
                    return false;
                }
                let y = PdlList::node(&rt.heap, Timestamp::TBD, new);
                if !l.try_append(x, y) {
                    return false;
                }
                (Some(x), lo, y.stamp(clock), y.seq())
            }
        };
        if rt.verifying() {
            let rec = AppendRecord { cell: cell.get().id, seq, ts: hi, fp: new.fingerprint() };
            rt.log.append(self.slot, rec);
        }
        self.overwritten(cell, old, lo, hi);
        true
    }

    fn overwritten(&mut self, cell: CellRef<V>, old: Option<Gc<PdlNode<V>>>, lo: Timestamp, hi: Timestamp) {
        let rt = self.rt;
        rt.stats[self.slot].overwrites.fetch_add(1, Relaxed);
        match rt.config.kind {
            SchemeKind::Ebr => rt.ebr.retire(self.slot, cell, hi),
            SchemeKind::SteamLf => {
                let age = if self.fresh_scans { Duration::ZERO } else { rt.config.steam_scan_interval };
                let scan = rt.time.scan_at_most(age);
                rt.compact_snapshot(self.slot, cell.get().ssl().unwrap(), scan);
            }
            SchemeKind::DlRt => {
                let x = old.expect("DL-RT cells are PDL lists");
                let item = DeprecatedItem { handle: Retired::Node(x), lo, hi };
                let out = rt.tracker.as_ref().unwrap().deprecate(self.slot, item);
                rt.process_expired(self.slot, out);
            }
            SchemeKind::SlRt => {
                let item = DeprecatedItem { handle: Retired::Cell(cell), lo, hi };
                let out = rt.tracker.as_ref().unwrap().deprecate(self.slot, item);
                rt.process_expired(self.slot, out);
            }
        }
    }

    /// Starts a read-only transaction; returns its snapshot timestamp.
    pub fn rtx_begin(&mut self) -> Timestamp {
        assert!(self.rtx.is_none(), "rtx already open on this participant");
        self.begin_op();
        let time = &self.rt.time;
        let t = time.board.announce(self.slot, &time.clock);
        time.clock.tick(&mut self.backoff);
        self.rtx = Some(t);
        t
    }

    pub fn rtx_end(&mut self) {
        let Some(t) = self.rtx.take() else { return };
        self.rt.time.board.unannounce(self.slot);
        if self.rt.verifying() {
            let reads = std::mem::take(&mut self.reads);
            self.rt.log.rtx(self.slot, RtxRecord { t, reads });
        }
        self.end_op();
    }

    /// The cell's value as of `t`.
    pub fn read_at(&mut self, cell: &VersionCell<V>, t: Timestamp) -> V {
        let clock = &self.rt.time.clock;
        let v = match &cell.list {
            CellList::Ssl(l) => {
                let mut x = l.head();
                while x.stamp(clock) > t {
                    x = x.left().expect("walk ends at the sentinel");
                }
                x.val()
            }
            CellList::Pdl(l) => {
                let mut x = l.head();
                while x.stamp(clock) > t {
                    x = x.left().expect("walk ends at the sentinel");
                }
                x.val()
            }
        };
        if self.rt.verifying() && self.rtx.is_some() {
            self.reads.push((cell.id, v.fingerprint()));
        }
        v
    }
}

impl<V: Payload> Drop for Participant<'_, V> {
    fn drop(&mut self) {
        self.rtx_end();
        if self.pins > 0 {
            self.pins = 1;
            self.end_op();
        }
        self.rt.time.board.release(self.slot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock_to(rt: &Runtime<u64>, t: i64) {
        let mut b = Backoff::default();
        while rt.time.clock.read().0 < t {
            rt.time.clock.tick(&mut b);
        }
        assert_eq!(rt.time.clock.read(), Timestamp(t));
    }

    fn cref(c: &VersionCell<u64>) -> CellRef<u64> {
        // the cells outlive every participant in these tests
        unsafe { CellRef::unowned(c) }
    }

    #[test]
    fn cas_succeeds_only_on_expected() {
        for kind in SchemeKind::ALL {
            let rt = Runtime::new(SchemeConfig::new(kind, 2));
            let c = rt.new_cell(10);
            let mut p = rt.participant();
            assert!(p.cas(cref(&c), 10, 11));
            assert!(!p.cas(cref(&c), 10, 12));
            assert_eq!(p.peek(&c), 11);
        }
    }

    #[test]
    fn rtx_timestamp_and_tick() {
        let rt = Runtime::<u64>::new(SchemeConfig::new(SchemeKind::SlRt, 2));
        clock_to(&rt, 7);
        let mut p = rt.participant();
        assert_eq!(p.rtx_begin(), Timestamp(7));
        assert!(rt.time.clock.read() >= Timestamp(8));
        p.rtx_end();
        assert_eq!(rt.time.board.get(p.slot()), Timestamp::EMPTY);
    }

    #[test]
    fn read_at_is_floor() {
        for kind in SchemeKind::ALL {
            let rt = Runtime::new(SchemeConfig::new(kind, 3));
            let c = rt.new_cell(1);
            let mut w = rt.participant();
            let mut r = rt.participant();
            let t1 = r.rtx_begin();
            assert!(w.cas(cref(&c), 1, 2));
            assert_eq!(r.read_at(&c, t1), 1);
            r.rtx_end();
            let t2 = r.rtx_begin();
            assert!(w.cas(cref(&c), 2, 3));
            assert_eq!(r.read_at(&c, t2), 2);
            assert_eq!(r.read_at(&c, t1), 1);
            r.rtx_end();
        }
    }

    #[test]
    fn slrt_retains_then_removes() {
        let mut rt = Runtime::new(SchemeConfig::new(SchemeKind::SlRt, 2));
        clock_to(&rt, 4);
        let c = rt.new_cell(40);
        let others: Vec<_> = (0..64).map(|i| rt.new_cell(i)).collect();
        clock_to(&rt, 5);
        {
            let mut r = rt.participant();
            let mut w = rt.participant();
            assert_eq!(r.rtx_begin(), Timestamp(5));
            clock_to(&rt, 7);
            assert!(w.cas(cref(&c), 40, 70));
            assert_eq!(c.ssl().unwrap().head().ts(), Timestamp(7));
            // push enough other items through the tracker to force flushes
            for (i, o) in others.iter().enumerate() {
                assert!(w.cas(cref(o), i as u64, 100));
            }
            assert_eq!(c.version_count(), 2);
            assert_eq!(r.read_at(&c, Timestamp(5)), 40);
            r.rtx_end();
            for (i, o) in others.iter().enumerate() {
                assert!(w.cas(cref(o), 100, i as u64));
            }
        }
        rt.drain();
        assert_eq!(c.version_count(), 1);
        assert!(others.iter().all(|o| o.version_count() == 1));
    }

    #[test]
    fn ebr_blocked_by_pinned_participant() {
        let mut rt = Runtime::new(SchemeConfig::new(SchemeKind::Ebr, 2));
        let c = rt.new_cell(0);
        {
            let mut r = rt.participant();
            let mut w = rt.participant();
            r.begin_op();
            let e = rt.ebr.epoch();
            for i in 0..1000 {
                w.begin_op();
                assert!(w.cas(cref(&c), i, i + 1));
                w.end_op();
            }
            assert!(rt.ebr.epoch() <= e + 1);
            assert_eq!(c.version_count(), 1001);
            r.end_op();
            for i in 1000..2000 {
                w.begin_op();
                assert!(w.cas(cref(&c), i, i + 1));
                w.end_op();
            }
            assert!(rt.ebr.epoch() >= e + 2);
            assert!(c.version_count() < 1001);
        }
        rt.drain();
        assert_eq!(c.version_count(), 1);
    }

    #[test]
    fn steam_splices_on_next_overwrite() {
        let rt = Runtime::new(SchemeConfig::new(SchemeKind::SteamLf, 2));
        let c = rt.new_cell(0);
        let mut w = rt.participant();
        w.set_fresh_scans(true);
        assert!(w.cas(cref(&c), 0, 1));
        assert_eq!(c.version_count(), 1);
        assert!(w.cas(cref(&c), 1, 2));
        assert_eq!(c.version_count(), 1);
        // a stale scan keeps the previous version until the next write
        w.set_fresh_scans(false);
        let mut b = Backoff::default();
        rt.time.clock.tick(&mut b);
        rt.time.scan_announce();
        assert!(w.cas(cref(&c), 2, 3));
        assert!(c.version_count() <= 2);
    }

    #[test]
    fn drain_is_exact_after_concurrent_writes() {
        for kind in SchemeKind::ALL {
            let mut rt = Runtime::new(SchemeConfig::new(kind, 5));
            let cells: Vec<_> = (0..8).map(|_| rt.new_cell(0)).collect();
            std::thread::scope(|s| {
                for w in 0..4u64 {
                    let (rt, cells) = (&rt, &cells);
                    s.spawn(move || {
                        let mut p = rt.participant();
                        for i in 0..2000u64 {
                            let c = &cells[((i * 7 + w) % 8) as usize];
                            if i % 5 == 0 {
                                let t = p.rtx_begin();
                                for c in cells {
                                    p.read_at(c, t);
                                }
                                p.rtx_end();
                            } else {
                                p.begin_op();
                                let v = p.peek(c);
                                p.cas(cref(c), v, v + 1);
                                p.end_op();
                            }
                        }
                    });
                }
            });
            rt.drain();
            if kind == SchemeKind::SteamLf {
                let mut p = rt.participant();
                p.set_fresh_scans(true);
                for c in &cells {
                    let v = p.peek(c);
                    assert!(p.cas(cref(c), v, v));
                }
            }
            for c in &cells {
                assert_eq!(c.version_count(), 1, "{kind}");
            }
            let rep = crate::oracle::check::check_log(rt.shadow());
            assert!(rep.ok(), "{kind}: {:?}", rep.violations.first());
            assert!(rep.rtxs > 0);
        }
    }

    #[test]
    fn same_results_under_every_scheme() {
        let run = |kind| {
            let rt = Runtime::new(SchemeConfig::new(kind, 2));
            let cells: Vec<_> = (0..4).map(|i| rt.new_cell(i)).collect();
            let mut p = rt.participant();
            let mut out = vec![];
            for i in 0..200u64 {
                let c = &cells[(i % 4) as usize];
                let v = p.peek(c);
                out.push(p.cas(cref(c), v, (v * 3 + i) % 1009) as u64);
                out.push(p.cas(cref(c), v, 0) as u64);
                if i % 9 == 0 {
                    let t = p.rtx_begin();
                    out.extend(cells.iter().map(|c| p.read_at(c, t)));
                    p.rtx_end();
                }
            }
            out
        };
        let base = run(SchemeKind::Ebr);
        for kind in SchemeKind::ALL {
            assert_eq!(run(kind), base, "{kind}");
        }
    }
}
