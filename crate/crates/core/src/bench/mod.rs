//! Workload driver for the multiversion maps: configuration, key
//! generators, the timed runner and result output.

mod config;
mod emit;
mod run;
mod zipf;

pub use config::{ConfigError, Dist, Structure, WorkloadConfig};
pub use emit::{write_results, write_to, EmitError, Format, Record, CSV_HEADER};
pub use run::{large_rtx_sweep, run_benchmark, run_on, summarize, RunMetrics, Summary};
pub use zipf::Zipf;
