//! Unbalanced external BST with non-blocking updates (flag/mark helping on
//! an update word per internal node). Child links are version cells, so a
//! stale child version keeps its whole subtree reachable.

use std::collections::HashSet;

use crate::heap::{AtomicTagged, CollectStats, Gc, HeapStats, Tagged, Trace, Tracer};
use crate::oracle::check::{check_log, CheckReport};
use crate::scheme::{CellRef, Participant, Runtime, SchemeConfig, SchemeStats, VersionCell};
use crate::structures::{MapOps, MvMap, SpaceStats};
use crate::Payload;

/// Largest key accepted by the tree; the two keys above it are sentinels.
pub const MAX_KEY: u64 = u64::MAX - 2;
const INF1: u64 = u64::MAX - 1;
const INF2: u64 = u64::MAX;

const CLEAN: usize = 0;
const IFLAG: usize = 1;
const DFLAG: usize = 2;
const MARK: usize = 3;

pub struct TreeNode {
    key: u64,
    uid: u64,
    body: Body,
}

enum Body {
    Leaf { value: u64 },
    Internal { left: VersionCell<Child>, right: VersionCell<Child>, update: AtomicTagged<Info> },
}

unsafe impl Trace for TreeNode {
    fn trace(&self, t: &mut Tracer) {
        if let Body::Internal { left, right, update } = &self.body {
            left.trace(t);
            right.trace(t);
            update.trace(t);
        }
    }
}

impl TreeNode {
    fn is_leaf(&self) -> bool {
        matches!(self.body, Body::Leaf { .. })
    }

    fn value(&self) -> u64 {
        match self.body {
            Body::Leaf { value } => value,
            Body::Internal { .. } => unreachable!("value of an internal node"),
        }
    }

    fn left(&self) -> &VersionCell<Child> {
        match &self.body {
            Body::Internal { left, .. } => left,
            Body::Leaf { .. } => unreachable!("child of a leaf"),
        }
    }

    fn right(&self) -> &VersionCell<Child> {
        match &self.body {
            Body::Internal { right, .. } => right,
            Body::Leaf { .. } => unreachable!("child of a leaf"),
        }
    }

    fn update(&self) -> &AtomicTagged<Info> {
        match &self.body {
            Body::Internal { update, .. } => update,
            Body::Leaf { .. } => unreachable!("update word of a leaf"),
        }
    }
}

/// A child link value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Child(Option<Gc<TreeNode>>);

impl Child {
    fn node(self) -> Gc<TreeNode> {
        self.0.expect("child links are never empty")
    }
}

unsafe impl Trace for Child {
    fn trace(&self, t: &mut Tracer) {
        self.0.trace(t)
    }
}

impl Payload for Child {
    fn fingerprint(&self) -> u64 {
        self.0.map_or(0, |n| n.uid)
    }
}

enum Info {
    Insert { p: Gc<TreeNode>, l: Gc<TreeNode>, new_internal: Gc<TreeNode> },
    Delete { gp: Gc<TreeNode>, p: Gc<TreeNode>, l: Gc<TreeNode>, pupdate: Tagged<Info> },
}

unsafe impl Trace for Info {
    fn trace(&self, t: &mut Tracer) {
        match self {
            Info::Insert { p, l, new_internal } => {
                t.mark(*p);
                t.mark(*l);
                t.mark(*new_internal);
            }
            Info::Delete { gp, p, l, pupdate } => {
                t.mark(*gp);
                t.mark(*p);
                t.mark(*l);
                pupdate.trace(t);
            }
        }
    }
}

pub struct MvBst {
    rt: Runtime<Child>,
    root: Gc<TreeNode>,
}

impl MvBst {
    pub fn new(config: SchemeConfig) -> Self {
        let rt = Runtime::new(config);
        let l = Self::leaf(&rt, INF1, 0);
        let r = Self::leaf(&rt, INF2, 0);
        let root = Self::internal(&rt, INF2, l, r);
        MvBst { rt, root }
    }

    pub fn runtime(&self) -> &Runtime<Child> {
        &self.rt
    }

    fn leaf(rt: &Runtime<Child>, key: u64, value: u64) -> Gc<TreeNode> {
        rt.heap().alloc(TreeNode { key, uid: rt.next_id(), body: Body::Leaf { value } })
    }

    fn internal(rt: &Runtime<Child>, key: u64, l: Gc<TreeNode>, r: Gc<TreeNode>) -> Gc<TreeNode> {
        let body = Body::Internal {
            left: rt.new_cell(Child(Some(l))),
            right: rt.new_cell(Child(Some(r))),
            update: AtomicTagged::new(Tagged::new(None, CLEAN)),
        };
        rt.heap().alloc(TreeNode { key, uid: rt.next_id(), body })
    }

    /// Internal nodes reachable through current child values.
    fn current_internals(&self) -> Vec<Gc<TreeNode>> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                continue;
            }
            out.push(n);
            stack.push(n.left().current().node());
            stack.push(n.right().current().node());
        }
        out
    }
}

struct Found {
    gp: Option<Gc<TreeNode>>,
    p: Gc<TreeNode>,
    l: Gc<TreeNode>,
    pupdate: Tagged<Info>,
    gpupdate: Tagged<Info>,
}

pub struct BstHandle<'t> {
    tree: &'t MvBst,
    p: Participant<'t, Child>,
}

fn left_cell(n: &TreeNode) -> &VersionCell<Child> {
    n.left()
}

fn right_cell(n: &TreeNode) -> &VersionCell<Child> {
    n.right()
}

impl<'t> BstHandle<'t> {
    pub fn participant(&mut self) -> &mut Participant<'t, Child> {
        &mut self.p
    }

    fn child(&mut self, n: Gc<TreeNode>, k: u64) -> Gc<TreeNode> {
        let cell = if k < n.key { n.left() } else { n.right() };
        self.p.peek(cell).node()
    }

    fn search(&mut self, k: u64) -> Found {
        let clean = Tagged::new(None, CLEAN);
        let (mut gp, mut p) = (None, self.tree.root);
        let (mut gpupdate, mut pupdate) = (clean, clean);
        let mut l = self.tree.root;
        while !l.is_leaf() {
            gp = Some(p);
            p = l;
            gpupdate = pupdate;
            pupdate = p.update().load();
            l = self.child(p, k);
        }
        Found { gp, p, l, pupdate, gpupdate }
    }

    fn cas_child(&mut self, parent: Gc<TreeNode>, old: Gc<TreeNode>, new: Gc<TreeNode>) {
        let cell = if new.key < parent.key {
            CellRef::owned(parent, left_cell)
        } else {
            CellRef::owned(parent, right_cell)
        };
        self.p.cas(cell, Child(Some(old)), Child(Some(new)));
    }

    fn help(&mut self, u: Tagged<Info>) {
        match u.tag() {
            IFLAG => self.help_insert(u.ptr().unwrap()),
            MARK => self.help_marked(u.ptr().unwrap()),
            DFLAG => {
                self.help_delete(u.ptr().unwrap());
            }
            _ => {}
        }
    }

    fn help_insert(&mut self, op: Gc<Info>) {
        let Info::Insert { p, l, new_internal } = *op else { unreachable!() };
        self.cas_child(p, l, new_internal);
        let _ = p.update().compare_exchange(Tagged::new(Some(op), IFLAG), Tagged::new(Some(op), CLEAN));
    }

    fn help_delete(&mut self, op: Gc<Info>) -> bool {
        let Info::Delete { gp, p, pupdate, .. } = *op else { unreachable!() };
        let mark = Tagged::new(Some(op), MARK);
        match p.update().compare_exchange(pupdate, mark) {
            Ok(()) => {
                self.help_marked(op);
                true
            }
            Err(cur) if cur == mark => {
                self.help_marked(op);
                true
            }
            Err(cur) => {
                self.help(cur);
                let _ = gp.update().compare_exchange(Tagged::new(Some(op), DFLAG), Tagged::new(Some(op), CLEAN));
                false
            }
        }
    }

    fn help_marked(&mut self, op: Gc<Info>) {
        let Info::Delete { gp, p, l, .. } = *op else { unreachable!() };
        let right = self.p.peek(p.right()).node();
        let other = if right == l { self.p.peek(p.left()).node() } else { right };
        self.cas_child(gp, p, other);
        let _ = gp.update().compare_exchange(Tagged::new(Some(op), DFLAG), Tagged::new(Some(op), CLEAN));
    }

    fn try_insert(&mut self, k: u64, v: u64) -> bool {
        let rt = &self.tree.rt;
        loop {
            let f = self.search(k);
            if f.l.key == k {
                return false;
            }
            if f.pupdate.tag() != CLEAN {
                self.help(f.pupdate);
                continue;
            }
            let new_leaf = MvBst::leaf(rt, k, v);
            let sibling = MvBst::leaf(rt, f.l.key, f.l.value());
            let (a, b) = if k < f.l.key { (new_leaf, sibling) } else { (sibling, new_leaf) };
            let new_internal = MvBst::internal(rt, k.max(f.l.key), a, b);
            let op = rt.heap().alloc(Info::Insert { p: f.p, l: f.l, new_internal });
            match f.p.update().compare_exchange(f.pupdate, Tagged::new(Some(op), IFLAG)) {
                Ok(()) => {
                    self.help_insert(op);
                    return true;
                }
                Err(cur) => self.help(cur),
            }
        }
    }

    fn try_delete(&mut self, k: u64) -> bool {
        let rt = &self.tree.rt;
        loop {
            let f = self.search(k);
            if f.l.key != k {
                return false;
            }
            let gp = f.gp.expect("user keys sit below the root");
            if f.gpupdate.tag() != CLEAN {
                self.help(f.gpupdate);
            } else if f.pupdate.tag() != CLEAN {
                self.help(f.pupdate);
            } else {
                let op = rt.heap().alloc(Info::Delete { gp, p: f.p, l: f.l, pupdate: f.pupdate });
                match gp.update().compare_exchange(f.gpupdate, Tagged::new(Some(op), DFLAG)) {
                    Ok(()) => {
                        if self.help_delete(op) {
                            return true;
                        }
                    }
                    Err(cur) => self.help(cur),
                }
            }
        }
    }
}

impl MapOps for BstHandle<'_> {
    fn insert(&mut self, k: u64, v: u64) -> bool {
        assert!(k <= MAX_KEY, "key {k} collides with a sentinel");
        self.p.begin_op();
        let r = self.try_insert(k, v);
        self.p.end_op();
        r
    }

    fn delete(&mut self, k: u64) -> bool {
        if k > MAX_KEY {
            return false;
        }
        self.p.begin_op();
        let r = self.try_delete(k);
        self.p.end_op();
        r
    }

    fn lookup(&mut self, k: u64) -> Option<u64> {
        self.p.begin_op();
        let l = self.search(k).l;
        self.p.end_op();
        (l.key == k && k <= MAX_KEY).then(|| l.value())
    }

    fn range_rtx(&mut self, a: u64, s: u64) -> Vec<(u64, u64)> {
        let (lo, hi) = (a.saturating_add(1), a.saturating_add(s).min(INF1));
        let t = self.p.rtx_begin();
        let mut out = Vec::new();
        let mut stack = vec![self.tree.root];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                if lo <= n.key && n.key < hi {
                    out.push((n.key, n.value()));
                }
                continue;
            }
            // keys < n.key go left, the rest right; push right first so the
            // output comes out sorted
            if hi > n.key {
                stack.push(self.p.read_at(n.right(), t).node());
            }
            if lo < n.key {
                stack.push(self.p.read_at(n.left(), t).node());
            }
        }
        self.p.rtx_end();
        out
    }
}

impl MvMap for MvBst {
    type Handle<'a> = BstHandle<'a>;

    fn handle(&self) -> BstHandle<'_> {
        BstHandle { tree: self, p: self.rt.participant() }
    }

    fn scheme_stats(&self) -> SchemeStats {
        self.rt.stats()
    }

    fn heap_stats(&self) -> HeapStats {
        self.rt.heap().stats()
    }

    fn space(&mut self) -> SpaceStats {
        let mut st = SpaceStats::default();
        let mut seen = HashSet::new();
        let mut stack = vec![self.root];
        seen.insert(self.root.addr());
        while let Some(n) = stack.pop() {
            st.structure_nodes += 1;
            if n.is_leaf() {
                continue;
            }
            for cell in [n.left(), n.right()] {
                st.cells += 1;
                cell.for_each_version(|_, c, _| {
                    st.version_nodes += 1;
                    let c = c.node();
                    if seen.insert(c.addr()) {
                        stack.push(c);
                    }
                });
            }
        }
        st
    }

    fn version_ids(&mut self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.root];
        seen.insert(self.root.addr());
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                continue;
            }
            for cell in [n.left(), n.right()] {
                cell.for_each_version(|_, c, seq| {
                    out.push((cell.id(), seq));
                    let c = c.node();
                    if seen.insert(c.addr()) {
                        stack.push(c);
                    }
                });
            }
        }
        out
    }

    fn drain(&mut self) {
        self.rt.drain();
    }

    fn overwrite_pass(&mut self) {
        let nodes = self.current_internals();
        let mut p = self.rt.participant();
        p.set_fresh_scans(true);
        for n in nodes {
            for cell in [CellRef::owned(n, left_cell), CellRef::owned(n, right_cell)] {
                p.begin_op();
                loop {
                    let cur = p.peek(cell.get());
                    if p.cas(cell, cur, cur) {
                        break;
                    }
                }
                p.end_op();
            }
        }
    }

    fn collect(&mut self) -> CollectStats {
        // No participant is alive (`&mut self`) and no node handle leaves
        // this module.
        unsafe { self.rt.collect(&self.root) }
    }

    fn check_snapshots(&self) -> CheckReport {
        check_log(self.rt.shadow())
    }
}
