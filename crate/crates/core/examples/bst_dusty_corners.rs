//! On the tree, an old child version keeps a whole old subtree alive.
//! Steam+LF only prunes a list when that cell is written again, so cold
//! cells keep their stale versions until an overwrite pass.

use mvgc::bench::{run_on, Structure, WorkloadConfig};
use mvgc::structures::{MvBst, MvMap};
use mvgc::SchemeKind;

fn main() {
    for scheme in [SchemeKind::SteamLf, SchemeKind::SlRt] {
        let cfg = WorkloadConfig {
            structure: Structure::Bst,
            scheme,
            n: 2000,
            update_threads: 2,
            small_rtx_threads: 2,
            large_rtx_threads: 0,
            duration_s: 0.5,
            warmup_s: 0.1,
            ..WorkloadConfig::default()
        };
        let mut tree = MvBst::new(cfg.scheme_config());
        let m = run_on(&mut tree, &cfg, 0).unwrap();
        println!(
            "{scheme:>5}: reachable versions {:>6}, tree nodes {:>6}, avg list {:.3}",
            m.reach_nodes, m.structure_nodes, m.avg_list_len
        );
        tree.drain();
        tree.overwrite_pass();
        let sp = tree.space();
        println!("       after drain + overwrite pass: versions {}, tree nodes {}", sp.version_nodes, sp.structure_nodes);
    }
}
