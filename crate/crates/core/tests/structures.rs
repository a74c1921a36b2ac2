//! Sequential equivalence of both maps with `BTreeMap` under every scheme,
//! plus a small concurrent run through the snapshot checker.

use std::collections::BTreeMap;

use mvgc::structures::{MapOps, MvBst, MvHashMap, MvMap};
use mvgc::{SchemeConfig, SchemeKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_run<H: MapOps>(h: &mut H, seed: u64, ops: usize, range: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = BTreeMap::new();
    for i in 0..ops {
        let k = rng.gen_range(1..=range);
        match rng.gen_range(0..4) {
            0 => {
                let v = rng.gen();
                let fresh = !model.contains_key(&k);
                if fresh {
                    model.insert(k, v);
                }
                assert_eq!(h.insert(k, v), fresh, "op {i}: insert {k}");
            }
            1 => assert_eq!(h.delete(k), model.remove(&k).is_some(), "op {i}: delete {k}"),
            2 => assert_eq!(h.lookup(k), model.get(&k).copied(), "op {i}: lookup {k}"),
            _ => {
                let s = rng.gen_range(1..40);
                let a = k - 1;
                let want: Vec<(u64, u64)> = model.range(a + 1..a + s).map(|(&k, &v)| (k, v)).collect();
                assert_eq!(h.range_rtx(a, s), want, "op {i}: rtx({a}, {s})");
            }
        }
    }
}

#[test]
fn hash_matches_btreemap() {
    for kind in SchemeKind::ALL {
        let map = MvHashMap::new(64, SchemeConfig::new(kind, 2), 11);
        reference_run(&mut map.handle(), 1, 10_000, 300);
    }
}

#[test]
fn bst_matches_btreemap() {
    for kind in SchemeKind::ALL {
        let map = MvBst::new(SchemeConfig::new(kind, 2));
        reference_run(&mut map.handle(), 2, 10_000, 300);
    }
}

#[test]
fn largest_user_key_is_usable() {
    let t = MvBst::new(SchemeConfig::new(SchemeKind::SlRt, 1));
    let mut h = t.handle();
    let k = mvgc::structures::bst::MAX_KEY;
    assert!(h.insert(k, 1));
    assert_eq!(h.lookup(k), Some(1));
    assert_eq!(h.range_rtx(k - 1, 2), vec![(k, 1)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn both_maps_agree(seed in any::<u64>(), kind in prop::sample::select(SchemeKind::ALL.to_vec())) {
        let hash = MvHashMap::new(16, SchemeConfig::new(kind, 1), seed);
        let bst = MvBst::new(SchemeConfig::new(kind, 1));
        reference_run(&mut hash.handle(), seed, 500, 40);
        reference_run(&mut bst.handle(), seed, 500, 40);
    }

    #[test]
    fn drained_lists_hold_one_version(seed in any::<u64>(), kind in prop::sample::select(SchemeKind::ALL.to_vec())) {
        let mut map = MvBst::new(SchemeConfig::new(kind, 1));
        reference_run(&mut map.handle(), seed, 300, 30);
        map.drain();
        if kind == SchemeKind::SteamLf {
            map.overwrite_pass();
        }
        let sp = map.space();
        prop_assert_eq!(sp.version_nodes, sp.cells);
    }
}

fn concurrent<M: MvMap>(map: &M) {
    std::thread::scope(|s| {
        for w in 0..4u64 {
            s.spawn(move || {
                let mut h = map.handle();
                let mut rng = ChaCha8Rng::seed_from_u64(w);
                for _ in 0..3000 {
                    let k = rng.gen_range(1..=128);
                    match rng.gen_range(0..3) {
                        0 => {
                            h.insert(k, rng.gen());
                        }
                        1 => {
                            h.delete(k);
                        }
                        _ => {
                            let got = h.range_rtx(k - 1, 20);
                            assert!(got.windows(2).all(|p| p[0].0 < p[1].0));
                            assert!(got.iter().all(|&(x, _)| x > k - 1 && x < k + 19));
                        }
                    }
                }
            });
        }
    });
}

#[test]
fn concurrent_rtxs_are_snapshots() {
    for kind in SchemeKind::ALL {
        let hash = MvHashMap::new(64, SchemeConfig::new(kind, 4), 3);
        concurrent(&hash);
        let r = hash.check_snapshots();
        assert!(r.ok() && r.rtxs > 0, "hash/{kind}: {:?}", r.violations.first());
        let bst = MvBst::new(SchemeConfig::new(kind, 4));
        concurrent(&bst);
        let r = bst.check_snapshots();
        assert!(r.ok() && r.rtxs > 0, "bst/{kind}: {:?}", r.violations.first());
    }
}
