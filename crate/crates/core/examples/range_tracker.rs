//! The range tracker holds deprecated intervals while an announced
//! timestamp falls inside them and hands them back once it is withdrawn.

use std::sync::Arc;

use mvgc::tracker::{DeprecatedItem, RangeTracker};
use mvgc::ts::{Backoff, TimeBase};
use mvgc::Timestamp;

fn main() {
    let time = Arc::new(TimeBase::new(2));
    let mut b = Backoff::default();
    for _ in 0..4 {
        time.clock.tick(&mut b);
    }
    let reader = time.board.claim().unwrap();
    let t = time.board.announce(reader, &time.clock);
    for _ in 0..10 {
        time.clock.tick(&mut b);
    }
    println!("reader announced {t}, clock now {}", time.clock.read());

    let mut tr = RangeTracker::new(time.clone(), Some(2));
    let items = [("x", 2, 4), ("y", 4, 7), ("z", 9, 12)];
    for (name, lo, hi) in items {
        let out = tr.deprecate(1, DeprecatedItem { handle: name, lo: Timestamp(lo), hi: Timestamp(hi) });
        for it in out {
            println!("  safe: {} [{}, {})", it.handle, it.lo, it.hi);
        }
    }
    println!("retained while {t} is announced: {}", tr.retained());

    time.board.unannounce(reader);
    for it in tr.flush_all() {
        println!("  safe after unannounce: {} [{}, {})", it.handle, it.lo, it.hi);
    }
}
