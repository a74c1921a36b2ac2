//! Property tests for the list, tracker and timestamp invariants.

use std::collections::BTreeSet;
use std::sync::Arc;

use mvgc::heap::Heap;
use mvgc::oracle::needed::{floor_lookup, needed_set};
use mvgc::pdl::PdlList;
use mvgc::ssl::SslList;
use mvgc::tracker::{DeprecatedItem, RangeTracker};
use mvgc::ts::{AnnScan, Backoff, TimeBase};
use mvgc::Timestamp;
use proptest::prelude::*;

fn stamps() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..3, 0..48).prop_map(|gaps| {
        let mut t = 1;
        gaps.into_iter()
            .map(|g| {
                t += g;
                t
            })
            .collect()
    })
}

fn ann(max: i64) -> impl Strategy<Value = Vec<Timestamp>> {
    prop::collection::btree_set(0..=max, 0..6).prop_map(|s| s.into_iter().map(Timestamp).collect())
}

proptest! {
    #[test]
    fn compact_keeps_exactly_needed(st in stamps(), a in ann(100), t in 0i64..100) {
        let heap = Heap::new();
        let list = SslList::new(&heap, 0u64);
        for (i, &s) in st.iter().enumerate() {
            prop_assert!(list.try_append(list.head(), SslList::node(&heap, Timestamp(s), i as u64 + 1)));
        }
        let stats = list.compact(&a, Timestamp(t), list.head());
        let got: BTreeSet<u64> = list.reachable().iter().map(|n| n.val()).filter(|&v| v != 0).collect();
        let hist: Vec<_> = st.iter().enumerate().map(|(i, &s)| (i as u64 + 1, Timestamp(s))).collect();
        prop_assert_eq!(got, needed_set(&hist, &a, Timestamp(t)));
        prop_assert!(stats.splices as usize <= st.len());
    }

    #[test]
    fn compactions_never_resurrect(st in stamps(), rounds in prop::collection::vec((ann(100), 0i64..100, 0usize..4), 1..6)) {
        let heap = Heap::new();
        let list = SslList::new(&heap, 0u64);
        let mut gone = BTreeSet::new();
        let mut next = 0usize;
        let mut last = 1i64;
        for (a, t, appends) in rounds {
            for _ in 0..appends {
                if let Some(&s) = st.get(next) {
                    last = last.max(s);
                }
                next += 1;
                prop_assert!(list.try_append(list.head(), SslList::node(&heap, Timestamp(last), next as u64)));
            }
            list.compact(&a, Timestamp(t), list.head());
            let now: BTreeSet<u64> = list.reachable().iter().map(|n| n.val()).collect();
            prop_assert!(now.is_disjoint(&gone));
            gone.extend((1..=next as u64).filter(|v| !now.contains(v)));
        }
    }

    #[test]
    fn pdl_search_is_floor(ops in prop::collection::vec((0u8..3, 0i64..3, any::<prop::sample::Index>()), 1..60)) {
        let heap = Heap::new();
        let list = PdlList::new(&heap, 0u64);
        let mut live: Vec<(mvgc::Gc<mvgc::pdl::PdlNode<u64>>, i64)> = vec![];
        let mut key = 1;
        for (i, (op, gap, pick)) in ops.into_iter().enumerate() {
            match op {
                0 => {
                    key += gap;
                    let y = PdlList::node(&heap, Timestamp(key), i as u64 + 1);
                    prop_assert!(list.try_append(list.head(), y));
                    live.push((y, key));
                }
                1 if live.len() > 1 => {
                    let j = pick.index(live.len() - 1);
                    prop_assert_eq!(list.remove(live[j].0), 1);
                    live.remove(j);
                }
                _ => {
                    let k = Timestamp(key - gap);
                    let mut entries = vec![(Timestamp::NEG_INF, 0u64)];
                    entries.extend(live.iter().map(|(n, s)| (Timestamp(*s), n.val())));
                    prop_assert_eq!(list.search(k), floor_lookup(&entries, k).unwrap());
                }
            }
        }
        let al: Vec<u64> = list.abstract_list().iter().rev().skip(1).map(|n| n.val()).collect();
        prop_assert_eq!(al, live.iter().map(|(n, _)| n.val()).collect::<Vec<_>>());
    }

    #[test]
    fn expiry_matches_definition(a in ann(30), t in 0i64..30, lo in 0i64..30, len in 0i64..10) {
        let hi = lo + len;
        let scan = AnnScan::new(a.clone(), Timestamp(t));
        let brute = hi <= t && !a.iter().any(|x| lo <= x.0 && x.0 < hi);
        prop_assert_eq!(scan.expires(Timestamp(lo), Timestamp(hi)), brute);
    }

    #[test]
    fn tracker_never_returns_live_intervals(
        steps in prop::collection::vec((0u8..4, 0i64..40, 1i64..12), 1..200),
        threshold in 1usize..8,
    ) {
        let time = Arc::new(TimeBase::new(3));
        let pins = [time.board.claim().unwrap(), time.board.claim().unwrap()];
        let worker = time.board.claim().unwrap();
        let mut tr: RangeTracker<usize> = RangeTracker::new(time.clone(), Some(threshold));
        let mut b = Backoff::default();
        let mut items = vec![];
        let mut returned = vec![];
        for (op, x, len) in steps {
            let now = time.clock.read().0;
            match op {
                0 => {
                    let s = pins[x as usize % 2];
                    if time.board.get(s) == Timestamp::EMPTY {
                        time.board.announce(s, &time.clock);
                    } else {
                        time.board.unannounce(s);
                    }
                }
                1 => {
                    time.clock.tick(&mut b);
                }
                _ => {
                    let lo = Timestamp((now - x).max(1));
                    let hi = Timestamp((lo.0 + len).min(now));
                    if lo <= hi {
                        let id = items.len();
                        items.push((lo, hi));
                        for it in tr.deprecate(worker, DeprecatedItem { handle: id, lo, hi }) {
                            // no currently announced timestamp may fall in it
                            for s in pins {
                                let v = time.board.get(s);
                                prop_assert!(!(v.is_valid() && it.lo <= v && v < it.hi), "{:?} returned while {v} announced", it);
                            }
                            returned.push(it.handle);
                        }
                    }
                }
            }
        }
        for s in pins {
            time.board.unannounce(s);
        }
        returned.extend(tr.flush_all().into_iter().map(|it| it.handle));
        returned.sort();
        prop_assert_eq!(returned, (0..items.len()).collect::<Vec<_>>());
    }
}

#[test]
fn clock_ticks_are_monotone_across_threads() {
    let time = TimeBase::new(4);
    let seen: Vec<Vec<i64>> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..4)
            .map(|_| {
                s.spawn(|| {
                    let mut b = Backoff::default();
                    (0..2000).map(|_| time.clock.tick(&mut b).0).collect::<Vec<_>>()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for v in &seen {
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }
    assert!(time.clock.read().0 <= 1 + 4 * 2000);
}
