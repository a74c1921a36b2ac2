//! Concurrent writers and snapshot readers on the multiversion hash map;
//! every rtx is checked afterwards against the shadow append log when the
//! `verify` feature is on.

use mvgc::structures::{MapOps, MvHashMap, MvMap};
use mvgc::{SchemeConfig, SchemeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut map = MvHashMap::new(1000, SchemeConfig::new(SchemeKind::SlRt, 5), 42);
    {
        let mut h = map.handle();
        for k in (2..=2000).step_by(2) {
            h.insert(k, k * 10);
        }
    }
    std::thread::scope(|s| {
        for w in 0..4u64 {
            let map = &map;
            s.spawn(move || {
                let mut h = map.handle();
                let mut rng = ChaCha8Rng::seed_from_u64(w);
                for _ in 0..20_000 {
                    let k = rng.gen_range(1..=2000);
                    if w == 0 {
                        // a reader: a sorted consistent view of 100 keys
                        let got = h.range_rtx(k, 100);
                        assert!(got.windows(2).all(|p| p[0].0 < p[1].0));
                    } else if rng.gen_bool(0.5) {
                        h.insert(k, rng.gen());
                    } else {
                        h.delete(k);
                    }
                }
            });
        }
    });
    let sp = map.space();
    println!("buckets {}, version nodes {}, avg list length {:.3}", sp.cells, sp.version_nodes, sp.avg_list_len());
    map.drain();
    println!("after drain: avg list length {:.3}", map.space().avg_list_len());
    let r = map.check_snapshots();
    if r.rtxs == 0 {
        println!("shadow log off (build with --features verify to check snapshots)");
    } else {
        println!("checked {} rtxs / {} reads: {} violations", r.rtxs, r.reads, r.violations.len());
    }
}
