//! Step-interleaving explorer.
//!
//! A scenario is a handful of step machines over shared list state. The
//! explorer runs every schedule (depth-first, rewinding shared state from
//! snapshots instead of replaying prefixes). States reached by different
//! prefixes are explored once; the schedule count is still exact.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::heap::{Gc, Heap};
use crate::oracle::needed::needed_set;
use crate::pdl::{self, PdlImage, PdlList, PdlNode};
use crate::ssl::{CompactOp, SslImage, SslList, SslNode};
use crate::ts::Timestamp;

pub trait Scenario {
    /// Everything that influences later steps and checks.
    type Snapshot: Clone + Eq + Hash;

    fn threads(&self) -> usize;
    fn is_done(&self, thread: usize) -> bool;
    /// Runs one step of `thread` and then the per-step checks.
    fn step(&mut self, thread: usize) -> Result<(), String>;
    fn check_final(&self) -> Result<(), String>;
    fn save(&self) -> Self::Snapshot;
    fn restore(&mut self, snap: &Self::Snapshot);
}

/// Thread indices in execution order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule(pub Vec<usize>);

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Schedule {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace().map(str::parse).collect::<Result<_, _>>().map(Schedule)
    }
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub schedule: Schedule,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (schedule: {})", self.message, self.schedule)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreStats {
    /// Complete schedules covered.
    pub schedules: u128,
    /// Distinct states expanded.
    pub states: usize,
    /// Longest schedule seen.
    pub max_len: usize,
}

fn enabled<S: Scenario>(s: &S) -> Vec<usize> {
    (0..s.threads()).filter(|&i| !s.is_done(i)).collect()
}

struct Dfs<S: Scenario> {
    memo: HashMap<S::Snapshot, u128>,
    path: Vec<usize>,
    max_steps: usize,
    max_len: usize,
}

impl<S: Scenario> Dfs<S> {
    fn fail(&self, message: String) -> Failure {
        Failure { schedule: Schedule(self.path.clone()), message }
    }

    fn run(&mut self, s: &mut S) -> Result<u128, Failure> {
        let ready = enabled(s);
        if ready.is_empty() {
            self.max_len = self.max_len.max(self.path.len());
            s.check_final().map_err(|m| self.fail(m))?;
            return Ok(1);
        }
        if self.path.len() >= self.max_steps {
            return Err(self.fail(format!("no termination within {} steps", self.max_steps)));
        }
        let snap = s.save();
        if let Some(&n) = self.memo.get(&snap) {
            return Ok(n);
        }
        let mut total = 0;
        for (j, &t) in ready.iter().enumerate() {
            if j > 0 {
                s.restore(&snap);
            }
            self.path.push(t);
            s.step(t).map_err(|m| self.fail(m))?;
            total += self.run(s)?;
            self.path.pop();
        }
        self.memo.insert(snap, total);
        Ok(total)
    }
}

/// Explores every schedule of `s` from its current state. Any schedule
/// longer than `max_steps` counts as a failure.
pub fn explore<S: Scenario>(s: &mut S, max_steps: usize) -> Result<ExploreStats, Failure> {
    let start = s.save();
    let mut dfs = Dfs { memo: HashMap::new(), path: Vec::new(), max_steps, max_len: 0 };
    let r = dfs.run(s);
    s.restore(&start);
    let schedules = r?;
    Ok(ExploreStats { schedules, states: dfs.memo.len(), max_len: dfs.max_len })
}

/// Runs `runs` uniformly random schedules.
pub fn explore_random<S: Scenario>(s: &mut S, runs: usize, seed: u64, max_steps: usize) -> Result<ExploreStats, Failure> {
    let start = s.save();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = ExploreStats::default();
    for _ in 0..runs {
        s.restore(&start);
        let mut path = Vec::new();
        let r = loop {
            let ready = enabled(s);
            let Some(&t) = ready.choose(&mut rng) else {
                break s.check_final();
            };
            if path.len() >= max_steps {
                break Err(format!("no termination within {max_steps} steps"));
            }
            path.push(t);
            if let Err(m) = s.step(t) {
                break Err(m);
            }
        };
        if let Err(message) = r {
            s.restore(&start);
            return Err(Failure { schedule: Schedule(path), message });
        }
        stats.schedules += 1;
        stats.max_len = stats.max_len.max(path.len());
    }
    s.restore(&start);
    Ok(stats)
}

/// Runs one schedule; threads left unfinished are then run in index order.
pub fn replay<S: Scenario>(s: &mut S, schedule: &Schedule) -> Result<(), Failure> {
    let mut path = Vec::new();
    let fail = |path: &Vec<usize>, message| Failure { schedule: Schedule(path.clone()), message };
    for &t in &schedule.0 {
        if t >= s.threads() || s.is_done(t) {
            return Err(fail(&path, format!("thread {t} cannot step")));
        }
        path.push(t);
        s.step(t).map_err(|m| fail(&path, m))?;
    }
    while let Some(&t) = enabled(s).first() {
        path.push(t);
        s.step(t).map_err(|m| fail(&path, m))?;
    }
    s.check_final().map_err(|m| fail(&path, m))
}

fn mask_of(idx: impl IntoIterator<Item = usize>) -> u64 {
    idx.into_iter().fold(0, |m, i| m | 1 << i)
}

// PDL

#[derive(Clone, PartialEq, Eq, Hash)]
enum PdlOp {
    Append(pdl::TryAppendOp<u64>),
    Remove(pdl::RemoveOp<u64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum PdlGoal {
    /// AL ends up as exactly these node indices, oldest first.
    Removes(u64),
    /// Exactly one append succeeds and only its node joins the list.
    OneAppend,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PdlSnapshot {
    nodes: Vec<PdlImage<u64>>,
    head: Gc<PdlNode<u64>>,
    ops: Vec<PdlOp>,
    results: Vec<Option<bool>>,
    added: u64,
    gone: u64,
    edges: u64,
}

/// Concurrent PDL operations on a small list whose nodes are numbered in
/// append order (0 is the sentinel).
pub struct PdlScenario {
    _heap: Heap,
    list: PdlList<u64>,
    nodes: Vec<Gc<PdlNode<u64>>>,
    ops: Vec<PdlOp>,
    results: Vec<Option<bool>>,
    goal: PdlGoal,
    added: u64,
    gone: u64,
    /// Left links ever observed, bit `8 * y + w` for y.left = w.
    edges: u64,
}

impl PdlScenario {
    fn build(len: usize, extra: usize) -> (Heap, PdlList<u64>, Vec<Gc<PdlNode<u64>>>) {
        let heap = Heap::new();
        let list = PdlList::new(&heap, 0);
        let mut nodes = vec![list.sentinel()];
        for k in 1..=len {
            let y = PdlList::node(&heap, Timestamp(k as i64), k as u64);
            assert!(list.try_append(list.head(), y));
            nodes.push(y);
        }
        for k in len + 1..=len + extra {
            nodes.push(PdlList::node(&heap, Timestamp(k as i64), k as u64));
        }
        (heap, list, nodes)
    }

    /// A list of `len` appended nodes with one concurrent remove per entry
    /// of `victims` (node indices; the head `len` is excluded).
    pub fn removes(len: usize, victims: &[usize]) -> Self {
        assert!(len < 8, "at most 7 nodes");
        assert!(victims.iter().all(|&v| v >= 1 && v < len), "victims must be superseded nodes");
        let (heap, list, nodes) = Self::build(len, 0);
        let ops = victims.iter().map(|&v| PdlOp::Remove(pdl::RemoveOp::new(nodes[v]))).collect();
        let keep = (0..=len).filter(|i| !victims.contains(i));
        let mut s = PdlScenario {
            _heap: heap,
            list,
            nodes,
            ops,
            results: vec![None; victims.len()],
            goal: PdlGoal::Removes(mask_of(keep)),
            added: mask_of(0..=len),
            gone: 0,
            edges: 0,
        };
        s.observe().expect("initial state is well formed");
        s
    }

    /// Removes of the two interior nodes of s←a←b←c.
    pub fn adjacent_removes() -> Self {
        Self::removes(3, &[1, 2])
    }

    /// s←a with `racers` concurrent `try_append(a, ·)` calls.
    pub fn racing_appends(racers: usize) -> Self {
        assert!((1..=5).contains(&racers));
        let (heap, list, nodes) = Self::build(1, racers);
        let a = nodes[1];
        let ops = (0..racers).map(|i| PdlOp::Append(pdl::TryAppendOp::new(a, nodes[2 + i]))).collect();
        let mut s = PdlScenario {
            _heap: heap,
            list,
            nodes,
            ops,
            results: vec![None; racers],
            goal: PdlGoal::OneAppend,
            added: mask_of(0..=1),
            gone: 0,
            edges: 0,
        };
        s.observe().expect("initial state is well formed");
        s
    }

    fn idx(&self, n: Gc<PdlNode<u64>>) -> usize {
        self.nodes.iter().position(|&m| m == n).expect("node belongs to the scenario")
    }

    fn al(&self) -> Vec<usize> {
        self.list.abstract_list().into_iter().map(|n| self.idx(n)).collect()
    }

    fn marked_between(&self, lo: usize, hi: usize) -> bool {
        let order: Vec<usize> = self.append_order();
        let (p, q) = (order.iter().position(|&i| i == lo), order.iter().position(|&i| i == hi));
        match (p, q) {
            (Some(p), Some(q)) => order[p + 1..q].iter().all(|&w| self.nodes[w].is_marked()),
            _ => false,
        }
    }

    /// Added nodes sorted by append index.
    fn append_order(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.added >> i & 1 == 1).collect();
        v.sort_by_key(|&i| self.nodes[i].seq());
        v
    }

    fn prec(&self, a: usize, b: usize) -> bool {
        self.nodes[a].seq() < self.nodes[b].seq()
    }

    fn observe(&mut self) -> Result<(), String> {
        let al = self.al();
        self.added |= mask_of(al.iter().copied());
        let in_al = mask_of(al.iter().copied());
        if in_al & self.gone != 0 {
            return Err(format!("node left AL and came back: AL={al:?}"));
        }
        self.gone |= self.added & !in_al;
        for &y in &self.append_order() {
            let n = self.nodes[y];
            if y == 0 {
                if n.left().is_some() {
                    return Err("sentinel has a left link".into());
                }
                continue;
            }
            let w = self.idx(n.left().ok_or(format!("node {y} has no left link"))?);
            if self.added >> w & 1 == 0 || !self.prec(w, y) || !self.marked_between(w, y) {
                return Err(format!("bad left link {y}.left = {w}"));
            }
            self.edges |= 1 << (8 * y + w);
            if let Some(r) = n.right() {
                let r = self.idx(r);
                if self.added >> r & 1 == 1 && (!self.prec(y, r) || !self.marked_between(y, r)) {
                    return Err(format!("bad right link {y}.right = {r}"));
                }
            }
            if !n.is_marked() && in_al >> y & 1 == 0 {
                return Err(format!("unmarked node {y} unreachable"));
            }
        }
        for op in &self.ops {
            if let PdlOp::Remove(r) = op {
                if let (false, Some((l, rr))) = (r.is_done(), r.frontier()) {
                    let (l, rr) = (self.idx(l), self.idx(rr));
                    if !self.prec(l, rr) || !self.marked_between(l, rr) {
                        return Err(format!("remove frontier ({l}, {rr}) skips an unmarked node"));
                    }
                }
            }
        }
        // no crossover: y.left = w once rules out z.left = x for w≺x≺y≺z
        let order = self.append_order();
        for (i, &w) in order.iter().enumerate() {
            for (j, &x) in order.iter().enumerate().skip(i + 1) {
                for (k, &y) in order.iter().enumerate().skip(j + 1) {
                    for &z in &order[k + 1..] {
                        let e1 = self.edges >> (8 * y + w) & 1 == 1;
                        let e2 = self.edges >> (8 * z + x) & 1 == 1;
                        if e1 && e2 {
                            return Err(format!("crossover: {y}.left={w} and {z}.left={x}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

impl Scenario for PdlScenario {
    type Snapshot = PdlSnapshot;

    fn threads(&self) -> usize {
        self.ops.len()
    }

    fn is_done(&self, t: usize) -> bool {
        match &self.ops[t] {
            PdlOp::Append(op) => op.is_done(),
            PdlOp::Remove(op) => op.is_done(),
        }
    }

    fn step(&mut self, t: usize) -> Result<(), String> {
        let swing = match &mut self.ops[t] {
            PdlOp::Append(op) => {
                self.results[t] = op.step(&self.list);
                None
            }
            PdlOp::Remove(op) => {
                if op.step() {
                    self.results[t] = Some(true);
                }
                op.take_swing()
            }
        };
        if let Some(s) = swing {
            if s.new.seq() > s.old.seq() {
                return Err(format!("left CAS moved {} to a newer node", self.idx(s.node)));
            }
        }
        self.observe()
    }

    fn check_final(&self) -> Result<(), String> {
        let al = self.al();
        match self.goal {
            PdlGoal::Removes(keep) => {
                let mut want: Vec<usize> = (0..self.nodes.len()).filter(|&i| keep >> i & 1 == 1).collect();
                want.reverse();
                if al != want {
                    return Err(format!("final AL {al:?}, expected {want:?}"));
                }
            }
            PdlGoal::OneAppend => {
                let won: Vec<usize> = (0..self.ops.len()).filter(|&i| self.results[i] == Some(true)).collect();
                if won.len() != 1 {
                    return Err(format!("{} appends succeeded", won.len()));
                }
                let w = 2 + won[0];
                if al != vec![w, 1, 0] {
                    return Err(format!("final AL {al:?}, expected [{w}, 1, 0]"));
                }
                if self.nodes[1].right() != Some(self.nodes[w]) {
                    return Err("right link of the old head not set".into());
                }
            }
        }
        Ok(())
    }

    fn save(&self) -> PdlSnapshot {
        PdlSnapshot {
            nodes: self.nodes.iter().map(|n| n.image()).collect(),
            head: self.list.head(),
            ops: self.ops.clone(),
            results: self.results.clone(),
            added: self.added,
            gone: self.gone,
            edges: self.edges,
        }
    }

    fn restore(&mut self, s: &PdlSnapshot) {
        for (n, img) in self.nodes.iter().zip(&s.nodes) {
            n.restore(img);
        }
        self.list.set_head(s.head);
        self.ops.clone_from(&s.ops);
        self.results.clone_from(&s.results);
        self.added = s.added;
        self.gone = s.gone;
        self.edges = s.edges;
    }
}

// SSL

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CompactSnapshot<'a> {
    nodes: Vec<SslImage<u64>>,
    ops: Vec<CompactOp<'a, u64>>,
    gone: u64,
}

/// Concurrent compactions with identical (A, t) from the head.
pub struct CompactScenario<'a> {
    _heap: Heap,
    list: SslList<u64>,
    nodes: Vec<Gc<SslNode<u64>>>,
    ops: Vec<CompactOp<'a, u64>>,
    /// Node indices that must stay reachable, sentinel included.
    needed: u64,
    gone: u64,
}

static EXAMPLE_A: [Timestamp; 1] = [Timestamp(3)];

impl<'a> CompactScenario<'a> {
    pub fn new(stamps: &[i64], a: &'a [Timestamp], t: Timestamp, copies: usize) -> Self {
        assert!(stamps.len() < 63);
        let heap = Heap::new();
        let list = SslList::new(&heap, 0);
        let mut nodes = vec![list.sentinel()];
        for (i, &k) in stamps.iter().enumerate() {
            let y = SslList::node(&heap, Timestamp(k), i as u64 + 1);
            assert!(list.try_append(list.head(), y));
            nodes.push(y);
        }
        let history: Vec<(u64, Timestamp)> = stamps.iter().enumerate().map(|(i, &k)| (i as u64 + 1, Timestamp(k))).collect();
        let needed = 1 | needed_set(&history, a, t).into_iter().fold(0, |m, i| m | 1 << i);
        let h = list.head();
        let ops = (0..copies).map(|_| CompactOp::new(&list, a, t, h)).collect();
        CompactScenario { _heap: heap, list, nodes, ops, needed, gone: 0 }
    }

    fn reachable(&self) -> u64 {
        self.list.reachable().into_iter().fold(0, |m, n| m | 1 << self.idx(n))
    }

    fn idx(&self, n: Gc<SslNode<u64>>) -> usize {
        self.nodes.iter().position(|&m| m == n).expect("node belongs to the scenario")
    }
}

impl CompactScenario<'static> {
    /// Stamps [1,2,4,5,7], A=[3], t=6, two compactions.
    pub fn example() -> Self {
        Self::new(&[1, 2, 4, 5, 7], &EXAMPLE_A, Timestamp(6), 2)
    }
}

impl<'a> Scenario for CompactScenario<'a> {
    type Snapshot = CompactSnapshot<'a>;

    fn threads(&self) -> usize {
        self.ops.len()
    }

    fn is_done(&self, t: usize) -> bool {
        self.ops[t].is_done()
    }

    fn step(&mut self, t: usize) -> Result<(), String> {
        self.ops[t].step();
        if let Some(s) = self.ops[t].take_splice() {
            if s.new.seq() >= s.old.seq() {
                return Err(format!("splice at {} did not move left", self.idx(s.node)));
            }
        }
        let r = self.reachable();
        if r & self.gone != 0 {
            return Err(format!("spliced node came back: reachable {r:#b}"));
        }
        if r & self.needed != self.needed {
            return Err(format!("needed node lost: reachable {r:#b}, needed {:#b}", self.needed));
        }
        self.gone |= !r & ((1 << self.nodes.len()) - 1);
        Ok(())
    }

    fn check_final(&self) -> Result<(), String> {
        let r = self.reachable();
        if r != self.needed {
            return Err(format!("final reachable {r:#b}, needed {:#b}", self.needed));
        }
        Ok(())
    }

    fn save(&self) -> CompactSnapshot<'a> {
        CompactSnapshot { nodes: self.nodes.iter().map(|n| n.image()).collect(), ops: self.ops.clone(), gone: self.gone }
    }

    fn restore(&mut self, s: &CompactSnapshot<'a>) {
        for (n, img) in self.nodes.iter().zip(&s.nodes) {
            n.restore(img);
        }
        self.ops.clone_from(&s.ops);
        self.gone = s.gone;
    }
}

/// Reachable node indices of a compaction scenario, for reporting.
pub fn reachable_stamps(s: &CompactScenario<'_>) -> Vec<Timestamp> {
    s.list.reachable().into_iter().map(|n: Gc<SslNode<u64>>| n.ts()).collect()
}
