//! Drive the benchmark from code and write the results as CSV.

use mvgc::bench::{run_benchmark, write_to, Format, Structure, WorkloadConfig};
use mvgc::SchemeKind;

fn main() {
    let mut all = vec![];
    for structure in [Structure::Hash, Structure::Bst] {
        for scheme in SchemeKind::ALL {
            let cfg = WorkloadConfig {
                structure,
                scheme,
                n: 5000,
                update_threads: 2,
                small_rtx_threads: 1,
                large_rtx_threads: 1,
                mixed_threads: 0,
                rtx_size: 1024,
                duration_s: 0.3,
                warmup_s: 0.1,
                ..WorkloadConfig::default()
            };
            all.extend(run_benchmark(&cfg).expect("valid config"));
        }
    }
    write_to(&all, Format::Csv, std::io::stdout().lock()).unwrap();
}
