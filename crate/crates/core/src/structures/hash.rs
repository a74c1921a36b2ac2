//! Separate-chaining hash map. Each bucket is a version cell whose value is
//! an immutable sorted chain; updates install a path-copied chain.

use std::collections::HashSet;

use crate::heap::{CollectStats, Gc, HeapStats, Trace, Tracer};
use crate::oracle::check::{check_log, CheckReport};
use crate::scheme::{CellRef, Participant, Runtime, SchemeConfig, SchemeStats, VersionCell};
use crate::structures::{mix64, MapOps, MvMap, SpaceStats};
use crate::Payload;

pub struct Chain {
    entries: Box<[(u64, u64)]>,
    fp: u64,
}

unsafe impl Trace for Chain {
    fn trace(&self, _: &mut Tracer) {}
}

impl Chain {
    fn new(entries: Vec<(u64, u64)>) -> Self {
        let fp = entries.iter().fold(0x9e3779b97f4a7c15, |h, &(k, v)| mix64(h ^ mix64(k ^ mix64(v))));
        Chain { entries: entries.into_boxed_slice(), fp }
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    fn get(&self, k: u64) -> Option<u64> {
        self.entries.binary_search_by_key(&k, |e| e.0).ok().map(|i| self.entries[i].1)
    }
}

/// A bucket value: the chain, or `None` for an empty bucket.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bucket(Option<Gc<Chain>>);

impl Bucket {
    fn entries(&self) -> &[(u64, u64)] {
        self.0.as_ref().map_or(&[], |c| c.entries())
    }

    fn get(&self, k: u64) -> Option<u64> {
        self.0.as_ref().and_then(|c| c.get(k))
    }
}

unsafe impl Trace for Bucket {
    fn trace(&self, t: &mut Tracer) {
        self.0.trace(t)
    }
}

impl Payload for Bucket {
    fn fingerprint(&self) -> u64 {
        self.0.as_ref().map_or(0, |c| if c.entries.is_empty() { 0 } else { c.fp })
    }
}

pub struct MvHashMap {
    rt: Runtime<Bucket>,
    buckets: Box<[VersionCell<Bucket>]>,
    seed: u64,
}

impl MvHashMap {
    /// A map sized for `expected` keys: 2 × `expected` buckets.
    pub fn new(expected: usize, config: SchemeConfig, seed: u64) -> Self {
        let rt = Runtime::new(config);
        let buckets = (0..(2 * expected).max(1)).map(|_| rt.new_cell(Bucket(None))).collect();
        MvHashMap { rt, buckets, seed }
    }

    pub fn runtime(&self) -> &Runtime<Bucket> {
        &self.rt
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    fn bucket(&self, k: u64) -> usize {
        (mix64(k ^ self.seed) % self.buckets.len() as u64) as usize
    }

    fn cell_ref(&self, i: usize) -> CellRef<Bucket> {
        // Buckets are allocated once and dropped together with the runtime.
        unsafe { CellRef::unowned(&self.buckets[i]) }
    }
}

pub struct HashHandle<'m> {
    map: &'m MvHashMap,
    p: Participant<'m, Bucket>,
}

impl<'t> HashHandle<'t> {
    pub fn participant(&mut self) -> &mut Participant<'t, Bucket> {
        &mut self.p
    }

    fn update(&mut self, k: u64, edit: impl Fn(&[(u64, u64)]) -> Option<Vec<(u64, u64)>>) -> bool {
        let i = self.map.bucket(k);
        let cell = &self.map.buckets[i];
        self.p.begin_op();
        let done = loop {
            let cur = self.p.peek(cell);
            let Some(entries) = edit(cur.entries()) else { break false };
            let new = Bucket(Some(self.map.rt.heap().alloc(Chain::new(entries))));
            if self.p.cas(self.map.cell_ref(i), cur, new) {
                break true;
            }
        };
        self.p.end_op();
        done
    }
}

impl MapOps for HashHandle<'_> {
    fn insert(&mut self, k: u64, v: u64) -> bool {
        self.update(k, |e| match e.binary_search_by_key(&k, |x| x.0) {
            Ok(_) => None,
            Err(pos) => {
                let mut out = Vec::with_capacity(e.len() + 1);
                out.extend_from_slice(&e[..pos]);
                out.push((k, v));
                out.extend_from_slice(&e[pos..]);
                Some(out)
            }
        })
    }

    fn delete(&mut self, k: u64) -> bool {
        self.update(k, |e| {
            let pos = e.binary_search_by_key(&k, |x| x.0).ok()?;
            let mut out = e.to_vec();
            out.remove(pos);
            Some(out)
        })
    }

    fn lookup(&mut self, k: u64) -> Option<u64> {
        let cell = &self.map.buckets[self.map.bucket(k)];
        self.p.begin_op();
        let v = self.p.peek(cell).get(k);
        self.p.end_op();
        v
    }

    fn range_rtx(&mut self, a: u64, s: u64) -> Vec<(u64, u64)> {
        let t = self.p.rtx_begin();
        let mut out = Vec::new();
        for k in a.saturating_add(1)..a.saturating_add(s) {
            let cell = &self.map.buckets[self.map.bucket(k)];
            if let Some(v) = self.p.read_at(cell, t).get(k) {
                out.push((k, v));
            }
        }
        self.p.rtx_end();
        out
    }
}

impl MvMap for MvHashMap {
    type Handle<'a> = HashHandle<'a>;

    fn handle(&self) -> HashHandle<'_> {
        HashHandle { map: self, p: self.rt.participant() }
    }

    fn scheme_stats(&self) -> SchemeStats {
        self.rt.stats()
    }

    fn heap_stats(&self) -> HeapStats {
        self.rt.heap().stats()
    }

    fn space(&mut self) -> SpaceStats {
        let mut st = SpaceStats { cells: self.buckets.len(), ..Default::default() };
        let mut chains = HashSet::new();
        for c in self.buckets.iter() {
            c.for_each_version(|_, b, _| {
                st.version_nodes += 1;
                if let Some(ch) = b.0 {
                    chains.insert(ch.addr());
                }
            });
        }
        st.structure_nodes = chains.len();
        st
    }

    fn version_ids(&mut self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for c in self.buckets.iter() {
            c.for_each_version(|_, _, seq| out.push((c.id(), seq)));
        }
        out
    }

    fn drain(&mut self) {
        self.rt.drain();
    }

    fn overwrite_pass(&mut self) {
        let mut p = self.rt.participant();
        p.set_fresh_scans(true);
        for i in 0..self.buckets.len() {
            p.begin_op();
            loop {
                let cur = p.peek(&self.buckets[i]);
                if p.cas(self.cell_ref(i), cur, cur) {
                    break;
                }
            }
            p.end_op();
        }
    }

    fn collect(&mut self) -> CollectStats {
        // No participant is alive (`&mut self`) and no node handle leaves
        // this module.
        unsafe { self.rt.collect(&&*self.buckets) }
    }

    fn check_snapshots(&self) -> CheckReport {
        check_log(self.rt.shadow())
    }
}
