//! Logical time: the global clock, the announcement board, and installed
//! announcement scans.

use std::fmt;
use std::hint;
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use arc_swap::ArcSwap;
use crossbeam_utils::CachePadded;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Key of every list sentinel.
    pub const NEG_INF: Timestamp = Timestamp(i64::MIN);
    /// Front padding of a compaction's announcement array.
    pub const PAD: Timestamp = Timestamp(-1);
    /// A free announcement slot.
    pub const EMPTY: Timestamp = Timestamp(-2);
    /// A version that was appended but not yet stamped.
    pub const TBD: Timestamp = Timestamp(-3);
    pub const FIRST: Timestamp = Timestamp(1);

    pub fn is_valid(self) -> bool {
        self.0 >= 1
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::NEG_INF => f.write_str("-inf"),
            Self::PAD => f.write_str("PAD"),
            Self::EMPTY => f.write_str("EMPTY"),
            Self::TBD => f.write_str("TBD"),
            Timestamp(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Adaptive spin delay used before incrementing the clock.
#[derive(Clone, Debug)]
pub struct Backoff {
    delay: u32,
    cap: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { delay: 0, cap: 1024 }
    }
}

impl Backoff {
    pub fn with_cap(cap: u32) -> Self {
        Backoff { delay: 0, cap }
    }

    pub fn delay(&self) -> u32 {
        self.delay
    }

    fn spin(&self) {
        for _ in 0..self.delay {
            hint::spin_loop();
        }
    }

    fn contended(&mut self) {
        self.delay = (self.delay * 2).max(1).min(self.cap);
    }

    fn quiet(&mut self) {
        self.delay /= 2;
    }
}

pub struct GlobalClock {
    counter: CachePadded<AtomicI64>,
}

impl Default for GlobalClock {
    fn default() -> Self {
        Self::new()
    }
}

impl GlobalClock {
    pub fn new() -> Self {
        Self::starting_at(Timestamp::FIRST)
    }

    pub fn starting_at(t: Timestamp) -> Self {
        assert!(t.is_valid());
        GlobalClock { counter: CachePadded::new(AtomicI64::new(t.0)) }
    }

    pub fn read(&self) -> Timestamp {
        Timestamp(self.counter.load(Ordering::SeqCst))
    }

    fn cas(&self, from: Timestamp, to: Timestamp) -> bool {
        self.counter
            .compare_exchange(from.0, to.0, Ordering::SeqCst, Ordering::SeqCst)
            .is_ok()
    }

    /// Returns a timestamp greater than the clock value at call start.
    ///
    /// If another thread advanced the clock during the delay, its value is
    /// used and no CAS is issued.
    pub fn tick(&self, backoff: &mut Backoff) -> Timestamp {
        let mut op = TickOp::new();
        op.step(self);
        backoff.spin();
        loop {
            if let Some(v) = op.step(self) {
                if op.contended {
                    backoff.contended();
                } else {
                    backoff.quiet();
                }
                return v;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TickPc {
    Start,
    Recheck,
    Cas,
    AfterFail,
    Done,
}

/// [`GlobalClock::tick`] split into single shared-memory accesses.
#[derive(Clone, Debug)]
pub struct TickOp {
    pc: TickPc,
    start: Timestamp,
    result: Option<Timestamp>,
    contended: bool,
}

impl Default for TickOp {
    fn default() -> Self {
        Self::new()
    }
}

impl TickOp {
    pub fn new() -> Self {
        TickOp { pc: TickPc::Start, start: Timestamp::NEG_INF, result: None, contended: false }
    }

    /// Value observed by the first read.
    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn result(&self) -> Option<Timestamp> {
        self.result
    }

    pub fn is_done(&self) -> bool {
        self.pc == TickPc::Done
    }

    pub fn step(&mut self, clock: &GlobalClock) -> Option<Timestamp> {
        match self.pc {
            TickPc::Start => {
                self.start = clock.read();
                self.pc = TickPc::Recheck;
            }
            TickPc::Recheck => {
                let now = clock.read();
                if now != self.start {
                    self.contended = true;
                    self.finish(now);
                } else {
                    self.pc = TickPc::Cas;
                }
            }
            TickPc::Cas => {
                if clock.cas(self.start, Timestamp(self.start.0 + 1)) {
                    self.finish(Timestamp(self.start.0 + 1));
                } else {
                    self.contended = true;
                    self.pc = TickPc::AfterFail;
                }
            }
            TickPc::AfterFail => {
                let now = clock.read();
                self.finish(now);
            }
            TickPc::Done => {}
        }
        self.result
    }

    fn finish(&mut self, v: Timestamp) {
        self.result = Some(v);
        self.pc = TickPc::Done;
    }
}

/// One announcement slot per participant.
pub struct AnnouncementBoard {
    slots: Box<[CachePadded<AtomicI64>]>,
    claimed: Box<[AtomicBool]>,
}

impl AnnouncementBoard {
    pub fn new(participants: usize) -> Self {
        assert!(participants > 0, "board needs at least one slot");
        AnnouncementBoard {
            slots: (0..participants)
                .map(|_| CachePadded::new(AtomicI64::new(Timestamp::EMPTY.0)))
                .collect(),
            claimed: (0..participants).map(|_| AtomicBool::new(false)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Claims a free slot for exclusive use.
    pub fn claim(&self) -> Option<usize> {
        (0..self.claimed.len()).find(|&i| {
            self.claimed[i]
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed)
                .is_ok()
        })
    }

    pub fn release(&self, slot: usize) {
        self.unannounce(slot);
        self.claimed[slot].store(false, Ordering::Release);
    }

    pub fn get(&self, slot: usize) -> Timestamp {
        Timestamp(self.slots[slot].load(Ordering::SeqCst))
    }

    fn set(&self, slot: usize, t: Timestamp) {
        self.slots[slot].store(t.0, Ordering::SeqCst)
    }

    /// Publishes the current clock value in `slot` and returns it.
    pub fn announce(&self, slot: usize, clock: &GlobalClock) -> Timestamp {
        let mut op = AnnounceOp::new(slot);
        loop {
            if let Some(t) = op.step(self, clock) {
                return t;
            }
        }
    }

    pub fn unannounce(&self, slot: usize) {
        self.set(slot, Timestamp::EMPTY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AnnPc {
    ReadClock,
    Write,
    Recheck,
    Done,
}

/// [`AnnouncementBoard::announce`] as a step machine.
#[derive(Clone, Debug)]
pub struct AnnounceOp {
    slot: usize,
    pc: AnnPc,
    t: Timestamp,
}

impl AnnounceOp {
    pub fn new(slot: usize) -> Self {
        AnnounceOp { slot, pc: AnnPc::ReadClock, t: Timestamp::EMPTY }
    }

    pub fn step(&mut self, board: &AnnouncementBoard, clock: &GlobalClock) -> Option<Timestamp> {
        match self.pc {
            AnnPc::ReadClock => {
                self.t = clock.read();
                self.pc = AnnPc::Write;
            }
            AnnPc::Write => {
                board.set(self.slot, self.t);
                self.pc = AnnPc::Recheck;
            }
            AnnPc::Recheck => {
                self.pc = if clock.read() == self.t { AnnPc::Done } else { AnnPc::ReadClock };
            }
            AnnPc::Done => {}
        }
        (self.pc == AnnPc::Done).then_some(self.t)
    }
}

/// Sorted announcements together with the clock value read before them.
#[derive(Clone, Debug)]
pub struct AnnScan {
    a: Box<[Timestamp]>,
    t: Timestamp,
    taken_at: Instant,
}

impl AnnScan {
    pub fn new(mut a: Vec<Timestamp>, t: Timestamp) -> Self {
        a.sort_unstable();
        a.dedup();
        AnnScan { a: a.into_boxed_slice(), t, taken_at: Instant::now() }
    }

    pub fn announcements(&self) -> &[Timestamp] {
        &self.a
    }

    pub fn t(&self) -> Timestamp {
        self.t
    }

    pub fn age(&self) -> Duration {
        self.taken_at.elapsed()
    }

    pub fn contains(&self, v: Timestamp) -> bool {
        self.a.binary_search(&v).is_ok()
    }

    /// Whether some announcement lies in `[lo, hi)`.
    pub fn intersects(&self, lo: Timestamp, hi: Timestamp) -> bool {
        let i = self.a.partition_point(|&a| a < lo);
        i < self.a.len() && self.a[i] < hi
    }

    /// Whether no current or future rtx can need a version alive over `[lo, hi)`.
    pub fn expires(&self, lo: Timestamp, hi: Timestamp) -> bool {
        hi <= self.t && !self.intersects(lo, hi)
    }
}

/// Clock, board and the installed scan, shared by every scheme.
pub struct TimeBase {
    pub clock: GlobalClock,
    pub board: AnnouncementBoard,
    installed: ArcSwap<AnnScan>,
}

impl TimeBase {
    pub fn new(participants: usize) -> Self {
        TimeBase {
            clock: GlobalClock::new(),
            board: AnnouncementBoard::new(participants),
            installed: ArcSwap::from_pointee(AnnScan::new(Vec::new(), Timestamp(0))),
        }
    }

    pub fn installed(&self) -> Arc<AnnScan> {
        self.installed.load_full()
    }

    pub fn is_installed(&self, scan: &Arc<AnnScan>) -> bool {
        Arc::ptr_eq(&self.installed.load(), scan)
    }

    /// Reads the board into a fresh scan and tries to install it.
    pub fn scan_announce(&self) -> Arc<AnnScan> {
        for _ in 0..2 {
            let old = self.installed.load_full();
            let t = self.clock.read();
            let mut a = Vec::with_capacity(self.board.len());
            for slot in 0..self.board.len() {
                let v = self.board.get(slot);
                if v == Timestamp::EMPTY {
                    continue;
                }
                // A value below the old threshold that the old scan did not
                // see belongs to an announce that has not passed its recheck.
                if v < old.t && !old.contains(v) {
                    continue;
                }
                a.push(v);
            }
            let new = Arc::new(AnnScan::new(a, t));
            let prev = self.installed.compare_and_swap(&old, Arc::clone(&new));
            if Arc::ptr_eq(&prev, &old) {
                return new;
            }
        }
        self.installed.load_full()
    }

    /// The installed scan, rescanned first if it is older than `max_age`.
    pub fn scan_at_most(&self, max_age: Duration) -> Arc<AnnScan> {
        let s = self.installed();
        if s.age() <= max_age {
            s
        } else {
            self.scan_announce()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_values_are_distinct_and_invalid() {
        let r = [Timestamp::NEG_INF, Timestamp::PAD, Timestamp::EMPTY, Timestamp::TBD];
        for (i, a) in r.iter().enumerate() {
            assert!(!a.is_valid());
            for b in &r[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(Timestamp::FIRST.is_valid());
    }

    #[test]
    fn uncontended_tick_cas() {
        let c = GlobalClock::starting_at(Timestamp(5));
        let mut op = TickOp::new();
        assert_eq!(op.step(&c), None);
        assert_eq!(op.step(&c), None);
        assert_eq!(op.step(&c), Some(Timestamp(6)));
        assert_eq!(c.read(), Timestamp(6));
    }

    #[test]
    fn tick_uses_concurrent_advance() {
        let c = GlobalClock::starting_at(Timestamp(5));
        let mut op = TickOp::new();
        op.step(&c);
        c.cas(Timestamp(5), Timestamp(6));
        assert_eq!(op.step(&c), Some(Timestamp(6)));
        assert_eq!(c.read(), Timestamp(6));
    }

    #[test]
    fn backoff_doubles_and_halves() {
        let mut b = Backoff::with_cap(8);
        for want in [1, 2, 4, 8, 8] {
            b.contended();
            assert_eq!(b.delay(), want);
        }
        b.quiet();
        assert_eq!(b.delay(), 4);
    }

    #[test]
    fn announce_retries_when_clock_moves() {
        let board = AnnouncementBoard::new(2);
        let clock = GlobalClock::starting_at(Timestamp(7));
        let mut op = AnnounceOp::new(1);
        op.step(&board, &clock);
        op.step(&board, &clock);
        assert_eq!(board.get(1), Timestamp(7));
        clock.cas(Timestamp(7), Timestamp(8));
        assert_eq!(op.step(&board, &clock), None);
        let t = loop {
            if let Some(t) = op.step(&board, &clock) {
                break t;
            }
        };
        assert_eq!(t, Timestamp(8));
        assert_eq!(board.get(1), Timestamp(8));
        board.unannounce(1);
        board.unannounce(1);
        assert_eq!(board.get(1), Timestamp::EMPTY);
    }

    #[test]
    fn scan_drops_empty_and_sorts() {
        let tb = TimeBase::new(3);
        tb.board.set(1, Timestamp(7));
        tb.board.set(2, Timestamp(5));
        tb.clock.cas(Timestamp(1), Timestamp(9));
        let s = tb.scan_announce();
        assert_eq!(s.announcements(), &[Timestamp(5), Timestamp(7)]);
        assert_eq!(s.t(), Timestamp(9));
        assert!(tb.is_installed(&s));
    }

    #[test]
    fn scan_filters_stale_values() {
        let tb = TimeBase::new(2);
        tb.clock.cas(Timestamp(1), Timestamp(9));
        tb.scan_announce();
        // slot written by an announce that read the clock long ago
        tb.board.set(0, Timestamp(2));
        let s = tb.scan_announce();
        assert!(s.announcements().is_empty());
        // a value the previous scan already held survives
        tb.board.set(0, Timestamp(9));
        let s = tb.scan_announce();
        assert_eq!(s.announcements(), &[Timestamp(9)]);
        tb.clock.cas(Timestamp(9), Timestamp(12));
        let s = tb.scan_announce();
        assert_eq!(s.announcements(), &[Timestamp(9)]);
    }

    #[test]
    fn expiry_is_half_open() {
        let s = AnnScan::new(vec![Timestamp(5)], Timestamp(20));
        assert!(s.expires(Timestamp(2), Timestamp(4)));
        assert!(s.expires(Timestamp(2), Timestamp(5)));
        assert!(!s.expires(Timestamp(4), Timestamp(7)));
        assert!(!s.expires(Timestamp(5), Timestamp(6)));
        assert!(s.expires(Timestamp(6), Timestamp(9)));
        assert!(!s.expires(Timestamp(6), Timestamp(21)));
    }

    #[test]
    fn concurrent_ticks_exhaustive() {
        // every interleaving of two ticks starting at 5
        fn go(clock: &GlobalClock, ops: &mut [TickOp; 2], out: &mut Vec<(Timestamp, Timestamp, Timestamp)>) {
            if ops.iter().all(|o| o.is_done()) {
                out.push((ops[0].result().unwrap(), ops[1].result().unwrap(), clock.read()));
                return;
            }
            for i in 0..2 {
                if ops[i].is_done() {
                    continue;
                }
                let saved = (clock.read(), ops.clone());
                ops[i].step(clock);
                go(clock, ops, out);
                clock.counter.store(saved.0 .0, Ordering::SeqCst);
                *ops = saved.1;
            }
        }
        let clock = GlobalClock::starting_at(Timestamp(5));
        let mut out = Vec::new();
        go(&clock, &mut [TickOp::new(), TickOp::new()], &mut out);
        assert!(out.len() > 10);
        for (a, b, fin) in out {
            assert!([6, 7].contains(&a.0) && [6, 7].contains(&b.0));
            assert!(fin.0 <= 7 && fin >= a.max(b));
        }
    }
}
