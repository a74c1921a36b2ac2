use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ConfigError, Dist, Structure, WorkloadConfig};
use super::zipf::Zipf;
use crate::structures::{MapOps, MvBst, MvHashMap, MvMap};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub config: WorkloadConfig,
    pub run: usize,
    /// Wall time of the measured phase, collection pauses excluded.
    pub measured_s: f64,
    pub updates: u64,
    pub rtxs: u64,
    pub lookups: u64,
    pub upd_ops_s: f64,
    pub rtx_ops_s: f64,
    pub lkp_ops_s: f64,
    pub reach_nodes: usize,
    pub cells: usize,
    pub structure_nodes: usize,
    pub avg_list_len: f64,
    pub avg_chain_c: f64,
    pub avg_compact_trav: f64,
    pub retained_items: usize,
    pub epoch_lag: u64,
    pub heap_objects: usize,
    /// Hash of every operation and its result, in per-worker order.
    pub digest: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample variance (0 for a single value).
    pub variance: f64,
}

pub fn summarize(values: impl IntoIterator<Item = f64>) -> Summary {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return Summary { mean: 0.0, variance: 0.0 };
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let variance = if v.len() < 2 {
        0.0
    } else {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    Summary { mean, variance }
}

/// Large-rtx sizes 2^8, 2^13, 2^16, 2^18, scaled down by a common factor
/// when the key range is below twice the largest.
pub fn large_rtx_sweep(key_range: u64) -> Vec<u64> {
    const SIZES: [u64; 4] = [1 << 8, 1 << 13, 1 << 16, 1 << 18];
    let top = 2 * SIZES[3];
    let mut out: Vec<u64> = SIZES
        .iter()
        .map(|&s| if key_range < top { (s as u128 * key_range as u128 / top as u128).max(2) as u64 } else { s })
        .collect();
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Update,
    SmallRtx,
    LargeRtx,
    Mixed,
}

enum Keys {
    Uniform(u64),
    Zipf(Zipf),
}

impl Keys {
    fn new(cfg: &WorkloadConfig) -> Self {
        match cfg.dist {
            Dist::Uniform => Keys::Uniform(cfg.key_range()),
            Dist::Zipf => Keys::Zipf(Zipf::new(cfg.key_range(), cfg.zipf_theta)),
        }
    }

    fn key(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            Keys::Uniform(r) => rng.gen_range(1..=*r),
            Keys::Zipf(z) => z.sample(rng),
        }
    }
}

#[derive(Default)]
struct Counts {
    updates: u64,
    rtxs: u64,
    lookups: u64,
    digest: u64,
}

impl Counts {
    fn mix(&mut self, x: u64) {
        self.digest = (self.digest.rotate_left(5) ^ x).wrapping_mul(0x100000001b3);
    }
}

struct Worker {
    role: Role,
    rng: ChaCha8Rng,
    counts: Counts,
}

struct Ctx<'a> {
    cfg: &'a WorkloadConfig,
    keys: &'a Keys,
}

impl Worker {
    fn update<H: MapOps>(&mut self, h: &mut H, ctx: &Ctx) {
        let k = ctx.keys.key(&mut self.rng);
        let r = if self.rng.gen_bool(0.5) { h.insert(k, self.rng.gen()) } else { h.delete(k) };
        self.counts.updates += 1;
        self.counts.mix(k << 1 | r as u64);
    }

    fn rtx<H: MapOps>(&mut self, h: &mut H, ctx: &Ctx, s: u64) {
        let range = ctx.cfg.key_range();
        let a = (ctx.keys.key(&mut self.rng) - 1).min(range - s);
        let got = h.range_rtx(a, s);
        self.counts.rtxs += 1;
        self.counts.mix(a ^ (got.len() as u64) << 32);
    }

    fn lookup<H: MapOps>(&mut self, h: &mut H, ctx: &Ctx) {
        let k = ctx.keys.key(&mut self.rng);
        let r = h.lookup(k);
        self.counts.lookups += 1;
        self.counts.mix(k ^ r.map_or(0, |v| v.rotate_left(17)));
    }

    fn op<H: MapOps>(&mut self, h: &mut H, ctx: &Ctx) {
        match self.role {
            Role::Update => self.update(h, ctx),
            Role::SmallRtx => self.rtx(h, ctx, ctx.cfg.small_rtx_size),
            Role::LargeRtx => self.rtx(h, ctx, ctx.cfg.rtx_size),
            Role::Mixed => match self.rng.gen_range(0..100) {
                0..=49 => self.update(h, ctx),
                50..=98 => self.lookup(h, ctx),
                _ => self.rtx(h, ctx, ctx.cfg.rtx_size),
            },
        }
    }
}

fn workers(cfg: &WorkloadConfig, seed: u64) -> Vec<Worker> {
    let roles = [
        (Role::Update, cfg.update_threads),
        (Role::SmallRtx, cfg.small_rtx_threads),
        (Role::LargeRtx, cfg.large_rtx_threads),
        (Role::Mixed, cfg.mixed_threads),
    ];
    roles
        .iter()
        .flat_map(|&(r, n)| std::iter::repeat_n(r, n))
        .enumerate()
        .map(|(i, role)| Worker {
            role,
            rng: ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15)),
            counts: Counts::default(),
        })
        .collect()
}

/// Runs workers for `secs` in slices, collecting garbage between slices.
/// Returns the time spent running workers.
fn timed<M: MvMap>(map: &mut M, ws: &mut [Worker], ctx: &Ctx, secs: f64) -> Duration {
    let slice = Duration::from_millis(ctx.cfg.slice_ms.max(1));
    let total = Duration::from_secs_f64(secs);
    let mut spent = Duration::ZERO;
    while spent < total {
        let len = slice.min(total - spent);
        let start = Instant::now();
        let stop = start + len;
        let m = &*map;
        std::thread::scope(|s| {
            for w in ws.iter_mut() {
                s.spawn(move || {
                    let mut h = m.handle();
                    while Instant::now() < stop {
                        w.op(&mut h, ctx);
                    }
                });
            }
        });
        spent += start.elapsed();
        map.collect();
    }
    spent
}

fn counted<M: MvMap>(map: &mut M, ws: &mut [Worker], ctx: &Ctx, ops: u64) -> Duration {
    let start = Instant::now();
    let m = &*map;
    std::thread::scope(|s| {
        for w in ws.iter_mut() {
            s.spawn(move || {
                let mut h = m.handle();
                for _ in 0..ops {
                    w.op(&mut h, ctx);
                }
            });
        }
    });
    start.elapsed()
}

/// Prefills `map`, runs the workload on it and measures it at quiescence.
/// The map is left as the run ended (no drain), for further inspection.
pub fn run_on<M: MvMap>(map: &mut M, cfg: &WorkloadConfig, run: usize) -> Result<RunMetrics, ConfigError> {
    cfg.validate()?;
    let seed = cfg.seed.wrapping_add(run as u64);
    let keys = Keys::new(cfg);
    let ctx = Ctx { cfg, keys: &keys };
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = map.handle();
        let mut size = 0;
        while size < cfg.n {
            let k = rng.gen_range(1..=cfg.key_range());
            size += h.insert(k, rng.gen()) as usize;
        }
    }
    map.collect();
    let mut ws = workers(cfg, seed);
    let spent = match cfg.ops_per_worker {
        Some(ops) => counted(map, &mut ws, &ctx, ops),
        None => {
            if cfg.warmup_s > 0.0 {
                timed(map, &mut ws, &ctx, cfg.warmup_s);
                for w in &mut ws {
                    w.counts = Counts::default();
                }
            }
            timed(map, &mut ws, &ctx, cfg.duration_s)
        }
    };
    let mut c = Counts::default();
    for w in &ws {
        c.updates += w.counts.updates;
        c.rtxs += w.counts.rtxs;
        c.lookups += w.counts.lookups;
        c.mix(w.counts.digest);
    }
    let space = map.space();
    let st = map.scheme_stats();
    let secs = spent.as_secs_f64().max(1e-9);
    Ok(RunMetrics {
        config: cfg.clone(),
        run,
        measured_s: spent.as_secs_f64(),
        updates: c.updates,
        rtxs: c.rtxs,
        lookups: c.lookups,
        upd_ops_s: c.updates as f64 / secs,
        rtx_ops_s: c.rtxs as f64 / secs,
        lkp_ops_s: c.lookups as f64 / secs,
        reach_nodes: space.version_nodes,
        cells: space.cells,
        structure_nodes: space.structure_nodes,
        avg_list_len: space.avg_list_len(),
        avg_chain_c: st.avg_chain_c,
        avg_compact_trav: st.avg_compact_traversal,
        retained_items: st.retained_items,
        epoch_lag: st.epoch_lag,
        heap_objects: map.heap_stats().objects,
        digest: c.digest,
    })
}

/// All `cfg.runs` runs, each on a fresh map.
pub fn run_benchmark(cfg: &WorkloadConfig) -> Result<Vec<RunMetrics>, ConfigError> {
    cfg.validate()?;
    (0..cfg.runs)
        .map(|run| {
            let seed = cfg.seed.wrapping_add(run as u64);
            match cfg.structure {
                Structure::Hash => run_on(&mut MvHashMap::new(cfg.n, cfg.scheme_config(), seed), cfg, run),
                Structure::Bst => run_on(&mut MvBst::new(cfg.scheme_config()), cfg, run),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::SchemeKind;

    fn small(scheme: SchemeKind, structure: Structure) -> WorkloadConfig {
        WorkloadConfig {
            structure,
            scheme,
            n: 200,
            update_threads: 1,
            small_rtx_threads: 0,
            large_rtx_threads: 0,
            rtx_size: 32,
            ops_per_worker: Some(2000),
            ..WorkloadConfig::default()
        }
    }

    #[test]
    fn sweep_scaling() {
        assert_eq!(large_rtx_sweep(1 << 20), vec![256, 8192, 65536, 262144]);
        assert_eq!(large_rtx_sweep(1 << 16), vec![32, 1024, 8192, 32768]);
        assert!(large_rtx_sweep(4).iter().all(|&s| s == 2));
    }

    #[test]
    fn summary_stats() {
        let s = summarize([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(summarize([7.0]).variance, 0.0);
    }

    #[test]
    fn single_worker_runs_are_deterministic() {
        for scheme in [SchemeKind::SlRt, SchemeKind::DlRt, SchemeKind::Ebr] {
            for structure in [Structure::Hash, Structure::Bst] {
                let mut cfg = small(scheme, structure);
                cfg.mixed_threads = 1;
                cfg.update_threads = 0;
                let a = run_benchmark(&cfg).unwrap().pop().unwrap();
                let b = run_benchmark(&cfg).unwrap().pop().unwrap();
                assert_eq!(a.digest, b.digest);
                assert_eq!((a.reach_nodes, a.cells, a.updates, a.lookups), (b.reach_nodes, b.cells, b.updates, b.lookups));
            }
        }
    }

    #[test]
    fn drained_hash_has_unit_lists() {
        let cfg = small(SchemeKind::SlRt, Structure::Hash);
        let mut map = MvHashMap::new(cfg.n, cfg.scheme_config(), cfg.seed);
        run_on(&mut map, &cfg, 0).unwrap();
        map.drain();
        assert_eq!(map.space().avg_list_len(), 1.0);
    }

    #[test]
    fn measurement_is_read_only() {
        let cfg = small(SchemeKind::SteamLf, Structure::Bst);
        let mut map = MvBst::new(cfg.scheme_config());
        run_on(&mut map, &cfg, 0).unwrap();
        assert_eq!(map.space(), map.space());
    }

    #[test]
    fn ebr_pinned_reader_blows_up() {
        let cfg = WorkloadConfig { n: 8, ..small(SchemeKind::Ebr, Structure::Hash) };
        let mut reach = vec![];
        for ops in [1000, 4000] {
            let mut map = MvHashMap::new(cfg.n, cfg.scheme_config(), 1);
            let mut reader = map.handle();
            reader.participant().begin_op();
            let c = WorkloadConfig { ops_per_worker: Some(ops), ..cfg.clone() };
            // run_on needs &mut; drive the updates by hand instead
            let mut ws = workers(&c, 1);
            let keys = Keys::new(&c);
            let ctx = Ctx { cfg: &c, keys: &keys };
            let mut h = map.handle();
            for _ in 0..ops {
                ws[0].op(&mut h, &ctx);
            }
            drop(h);
            reader.participant().end_op();
            drop(reader);
            reach.push(map.space().version_nodes);
        }
        // about half the updates are no-ops (insert of a present key and so on)
        assert!(reach[1] > reach[0] + 1000, "{reach:?}");
    }
}
