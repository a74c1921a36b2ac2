use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mvgc::bench::{run_benchmark, write_results, Dist, Format, Structure, WorkloadConfig};
use mvgc::SchemeKind;

/// Benchmark a multiversion map under one reclamation scheme.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// hash or bst
    #[arg(long, default_value = "hash")]
    structure: Structure,
    /// ebr, steam, dlrt or slrt
    #[arg(long, default_value = "slrt")]
    scheme: SchemeKind,
    /// Initial number of keys; keys are drawn from [1, 2 * size]
    #[arg(long, default_value_t = 10_000)]
    size: usize,
    #[arg(long, default_value_t = 4)]
    update_threads: usize,
    /// Workers running rtxs of size 16
    #[arg(long, default_value_t = 2)]
    small_rtx_threads: usize,
    /// Workers running rtxs of --rtx-size
    #[arg(long, default_value_t = 2)]
    large_rtx_threads: usize,
    /// Workers doing 50% updates, 49% lookups, 1% rtxs
    #[arg(long, default_value_t = 0)]
    mixed: usize,
    #[arg(long, default_value_t = 256)]
    rtx_size: u64,
    /// uniform or zipf
    #[arg(long, default_value = "uniform")]
    dist: Dist,
    #[arg(long, default_value_t = 0.99)]
    zipf_theta: f64,
    #[arg(long, default_value_t = 2.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 0.5)]
    warmup_s: f64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Output file; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let a = Args::parse();
    let cfg = WorkloadConfig {
        structure: a.structure,
        scheme: a.scheme,
        n: a.size,
        update_threads: a.update_threads,
        small_rtx_threads: a.small_rtx_threads,
        large_rtx_threads: a.large_rtx_threads,
        mixed_threads: a.mixed,
        rtx_size: a.rtx_size,
        dist: a.dist,
        zipf_theta: a.zipf_theta,
        duration_s: a.duration_s,
        warmup_s: a.warmup_s,
        runs: a.runs,
        seed: a.seed,
        ..WorkloadConfig::default()
    };
    let runs = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_results(&runs, a.format, a.out.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
