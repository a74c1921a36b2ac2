//! Epoch-based reclamation cannot free anything retired after the oldest
//! pinned epoch, so long rtxs on an oversubscribed machine leave long
//! version lists. The range-tracking scheme keeps only what rtxs need.

use mvgc::bench::{run_benchmark, summarize, Dist, WorkloadConfig};
use mvgc::SchemeKind;

fn main() {
    let workers = 4 * std::thread::available_parallelism().map_or(1, |n| n.get());
    for scheme in [SchemeKind::Ebr, SchemeKind::SlRt] {
        let cfg = WorkloadConfig {
            scheme,
            n: 25,
            update_threads: workers / 2,
            small_rtx_threads: 0,
            large_rtx_threads: workers - workers / 2,
            rtx_size: 48,
            dist: Dist::Zipf,
            duration_s: 0.5,
            warmup_s: 0.1,
            runs: 5,
            ..WorkloadConfig::default()
        };
        let runs = run_benchmark(&cfg).unwrap();
        let len = summarize(runs.iter().map(|m| m.avg_list_len));
        let kept = summarize(runs.iter().map(|m| m.retained_items as f64));
        println!(
            "{scheme:>4}: avg list length {:.2} (var {:.2}), retained items {:.0}",
            len.mean, len.variance, kept.mean
        );
    }
}
