//! Node storage for the version lists.
//!
//! Lock-free lists let traversals keep walking through nodes that were
//! already unlinked (PDL's right links even point at spliced nodes), so nodes
//! cannot be freed at unlink time. Instead every node lives in a [`Heap`] and
//! storage is reclaimed only by a stop-the-world mark/sweep
//! ([`Heap::collect`]) that the owner runs while no operation is in flight.
//! Between collections a [`Gc`] handle is just a pointer.

use std::fmt;
use std::marker::PhantomData;
use std::mem;
use std::ops::Deref;
use std::ptr::{self, NonNull};
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicUsize, Ordering};

use crossbeam_utils::CachePadded;

const SHARDS: usize = 64;

/// Types that can report the heap objects they reference.
///
/// # Safety
///
/// `trace` must mark every [`Gc`] reachable through `self` that may be
/// dereferenced after the next collection. Missing an edge frees a live
/// object.
pub unsafe trait Trace {
    fn trace(&self, tracer: &mut Tracer);
}

struct VTable {
    trace: unsafe fn(NonNull<Header>, &mut Tracer),
    drop: unsafe fn(NonNull<Header>),
    size: usize,
}

#[repr(C)]
struct Header {
    next: AtomicPtr<Header>,
    marked: AtomicBool,
    vtable: &'static VTable,
}

#[repr(C)]
struct GcBox<T> {
    header: Header,
    value: T,
}

impl<T: Trace> GcBox<T> {
    const VTABLE: VTable = VTable {
        trace: Self::trace_erased,
        drop: Self::drop_erased,
        size: mem::size_of::<GcBox<T>>(),
    };

    unsafe fn trace_erased(h: NonNull<Header>, tracer: &mut Tracer) {
        let b = h.cast::<GcBox<T>>();
        unsafe { (*b.as_ptr()).value.trace(tracer) }
    }

    unsafe fn drop_erased(h: NonNull<Header>) {
        drop(unsafe { Box::from_raw(h.cast::<GcBox<T>>().as_ptr()) });
    }
}

/// A shared handle to a heap object. Copyable; equality is identity.
pub struct Gc<T> {
    ptr: NonNull<GcBox<T>>,
    _marker: PhantomData<T>,
}

impl<T> Clone for Gc<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Gc<T> {}

impl<T> PartialEq for Gc<T> {
    fn eq(&self, other: &Self) -> bool {
        self.ptr == other.ptr
    }
}

impl<T> Eq for Gc<T> {}

impl<T> std::hash::Hash for Gc<T> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.ptr.hash(state)
    }
}

impl<T> fmt::Debug for Gc<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gc({:#x})", self.addr())
    }
}

unsafe impl<T: Send + Sync> Send for Gc<T> {}
unsafe impl<T: Send + Sync> Sync for Gc<T> {}

impl<T> Deref for Gc<T> {
    type Target = T;

    fn deref(&self) -> &T {
        // Objects stay allocated until a collection that cannot observe this
        // handle (see `Heap::collect`).
        unsafe { &(*self.ptr.as_ptr()).value }
    }
}

impl<T> Gc<T> {
    pub fn ptr_eq(a: Self, b: Self) -> bool {
        a.ptr == b.ptr
    }

    /// Address of the object; stable for its lifetime.
    pub fn addr(self) -> usize {
        self.ptr.as_ptr() as usize
    }

    pub fn erase(self) -> GcAny {
        GcAny { ptr: self.ptr.cast() }
    }

    fn header(self) -> NonNull<Header> {
        self.ptr.cast()
    }

    fn from_raw(p: *mut GcBox<T>) -> Option<Self> {
        NonNull::new(p).map(|ptr| Gc { ptr, _marker: PhantomData })
    }
}

/// A type-erased handle, only useful for keeping an object alive.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct GcAny {
    ptr: NonNull<Header>,
}

unsafe impl Send for GcAny {}
unsafe impl Sync for GcAny {}

unsafe impl Trace for GcAny {
    fn trace(&self, tracer: &mut Tracer) {
        tracer.mark_header(self.ptr);
    }
}

unsafe impl<T> Trace for Gc<T> {
    fn trace(&self, tracer: &mut Tracer) {
        tracer.mark_header(self.header());
    }
}

/// A nullable atomic link to a heap object.
pub struct AtomicGc<T> {
    ptr: AtomicPtr<GcBox<T>>,
    _marker: PhantomData<T>,
}

unsafe impl<T: Send + Sync> Send for AtomicGc<T> {}
unsafe impl<T: Send + Sync> Sync for AtomicGc<T> {}

fn raw<T>(g: Option<Gc<T>>) -> *mut GcBox<T> {
    g.map_or(ptr::null_mut(), |g| g.ptr.as_ptr())
}

impl<T> AtomicGc<T> {
    pub fn new(g: Option<Gc<T>>) -> Self {
        AtomicGc { ptr: AtomicPtr::new(raw(g)), _marker: PhantomData }
    }

    pub fn null() -> Self {
        Self::new(None)
    }

    pub fn load(&self, order: Ordering) -> Option<Gc<T>> {
        Gc::from_raw(self.ptr.load(order))
    }

    pub fn store(&self, g: Option<Gc<T>>, order: Ordering) {
        self.ptr.store(raw(g), order)
    }

    /// Sequentially consistent CAS; on failure returns the observed value.
    pub fn compare_exchange(
        &self,
        current: Option<Gc<T>>,
        new: Option<Gc<T>>,
    ) -> Result<(), Option<Gc<T>>> {
        self.ptr
            .compare_exchange(raw(current), raw(new), Ordering::SeqCst, Ordering::SeqCst)
            .map(|_| ())
            .map_err(Gc::from_raw)
    }
}

impl<T> fmt::Debug for AtomicGc<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AtomicGc({:?})", self.load(Ordering::Relaxed))
    }
}

unsafe impl<T> Trace for AtomicGc<T> {
    fn trace(&self, tracer: &mut Tracer) {
        if let Some(g) = self.load(Ordering::Acquire) {
            tracer.mark(g);
        }
    }
}

const TAG_MASK: usize = 0b11;

/// A heap link with a 2-bit tag packed into the low bits.
pub struct Tagged<T> {
    word: usize,
    _marker: PhantomData<T>,
}

impl<T> Clone for Tagged<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Tagged<T> {}

impl<T> PartialEq for Tagged<T> {
    fn eq(&self, other: &Self) -> bool {
        self.word == other.word
    }
}

impl<T> Eq for Tagged<T> {}

impl<T> fmt::Debug for Tagged<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tagged({:?}, {})", self.ptr(), self.tag())
    }
}

unsafe impl<T: Send + Sync> Send for Tagged<T> {}
unsafe impl<T: Send + Sync> Sync for Tagged<T> {}

impl<T> Tagged<T> {
    pub fn new(ptr: Option<Gc<T>>, tag: usize) -> Self {
        debug_assert!(tag <= TAG_MASK);
        debug_assert!(mem::align_of::<GcBox<T>>() > TAG_MASK);
        Tagged { word: raw(ptr) as usize | tag, _marker: PhantomData }
    }

    pub fn ptr(self) -> Option<Gc<T>> {
        Gc::from_raw((self.word & !TAG_MASK) as *mut GcBox<T>)
    }

    pub fn tag(self) -> usize {
        self.word & TAG_MASK
    }
}

unsafe impl<T> Trace for Tagged<T> {
    fn trace(&self, tracer: &mut Tracer) {
        if let Some(g) = self.ptr() {
            tracer.mark(g);
        }
    }
}

pub struct AtomicTagged<T> {
    word: AtomicUsize,
    _marker: PhantomData<T>,
}

unsafe impl<T: Send + Sync> Send for AtomicTagged<T> {}
unsafe impl<T: Send + Sync> Sync for AtomicTagged<T> {}

impl<T> AtomicTagged<T> {
    pub fn new(v: Tagged<T>) -> Self {
        AtomicTagged { word: AtomicUsize::new(v.word), _marker: PhantomData }
    }

    pub fn load(&self) -> Tagged<T> {
        Tagged { word: self.word.load(Ordering::SeqCst), _marker: PhantomData }
    }

    pub fn compare_exchange(&self, current: Tagged<T>, new: Tagged<T>) -> Result<(), Tagged<T>> {
        self.word
            .compare_exchange(current.word, new.word, Ordering::SeqCst, Ordering::SeqCst)
            .map(|_| ())
            .map_err(|word| Tagged { word, _marker: PhantomData })
    }
}

unsafe impl<T> Trace for AtomicTagged<T> {
    fn trace(&self, tracer: &mut Tracer) {
        self.load().trace(tracer)
    }
}

/// Marking worklist handed to [`Trace::trace`].
pub struct Tracer {
    stack: Vec<NonNull<Header>>,
    marked: usize,
}

impl Tracer {
    pub fn mark<T>(&mut self, g: Gc<T>) {
        self.mark_header(g.header());
    }

    fn mark_header(&mut self, h: NonNull<Header>) {
        let header = unsafe { h.as_ref() };
        if !header.marked.swap(true, Ordering::Relaxed) {
            self.marked += 1;
            self.stack.push(h);
        }
    }

    fn drain(&mut self) {
        while let Some(h) = self.stack.pop() {
            let vt = unsafe { h.as_ref().vtable };
            unsafe { (vt.trace)(h, self) };
        }
    }
}

#[derive(Default)]
struct Shard {
    head: AtomicPtr<Header>,
    objects: AtomicUsize,
    bytes: AtomicUsize,
}

/// Objects and bytes currently registered with a heap (live or garbage).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HeapStats {
    pub objects: usize,
    pub bytes: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CollectStats {
    pub marked: usize,
    pub freed: usize,
}

pub struct Heap {
    shards: Box<[CachePadded<Shard>]>,
}

unsafe impl Send for Heap {}
unsafe impl Sync for Heap {}

impl Default for Heap {
    fn default() -> Self {
        Self::new()
    }
}

fn shard_index() -> usize {
    use std::cell::Cell;
    static NEXT: AtomicUsize = AtomicUsize::new(0);
    thread_local! {
        static IDX: Cell<usize> = const { Cell::new(usize::MAX) };
    }
    IDX.with(|c| {
        if c.get() == usize::MAX {
            c.set(NEXT.fetch_add(1, Ordering::Relaxed) % SHARDS);
        }
        c.get()
    })
}

impl Heap {
    pub fn new() -> Self {
        Heap { shards: (0..SHARDS).map(|_| CachePadded::new(Shard::default())).collect() }
    }

    pub fn alloc<T: Trace + Send + Sync + 'static>(&self, value: T) -> Gc<T> {
        let boxed = Box::new(GcBox {
            header: Header {
                next: AtomicPtr::new(ptr::null_mut()),
                marked: AtomicBool::new(false),
                vtable: &GcBox::<T>::VTABLE,
            },
            value,
        });
        let ptr = NonNull::from(Box::leak(boxed));
        let h = ptr.cast::<Header>();
        let shard = &self.shards[shard_index()];
        let mut head = shard.head.load(Ordering::Relaxed);
        loop {
            unsafe { h.as_ref().next.store(head, Ordering::Relaxed) };
            match shard.head.compare_exchange_weak(head, h.as_ptr(), Ordering::Release, Ordering::Relaxed) {
                Ok(_) => break,
                Err(cur) => head = cur,
            }
        }
        shard.objects.fetch_add(1, Ordering::Relaxed);
        shard.bytes.fetch_add(mem::size_of::<GcBox<T>>(), Ordering::Relaxed);
        Gc { ptr, _marker: PhantomData }
    }

    pub fn stats(&self) -> HeapStats {
        self.shards.iter().fold(HeapStats::default(), |acc, s| HeapStats {
            objects: acc.objects + s.objects.load(Ordering::Relaxed),
            bytes: acc.bytes + s.bytes.load(Ordering::Relaxed),
        })
    }

    /// Frees every object not reachable from `roots`.
    ///
    /// # Safety
    ///
    /// No other thread may access this heap's objects during the call, and
    /// no handle to an object unreachable from `roots` may be used afterwards.
    /// `roots` must only reach objects of this heap.
    pub unsafe fn collect(&self, roots: &dyn Trace) -> CollectStats {
        let mut tracer = Tracer { stack: Vec::new(), marked: 0 };
        roots.trace(&mut tracer);
        tracer.drain();
        let mut freed = 0;
        for shard in self.shards.iter() {
            let mut cur = shard.head.swap(ptr::null_mut(), Ordering::Acquire);
            let mut kept: *mut Header = ptr::null_mut();
            let (mut objects, mut bytes) = (0, 0);
            while let Some(h) = NonNull::new(cur) {
                let header = unsafe { h.as_ref() };
                cur = header.next.load(Ordering::Relaxed);
                if header.marked.swap(false, Ordering::Relaxed) {
                    header.next.store(kept, Ordering::Relaxed);
                    kept = h.as_ptr();
                    objects += 1;
                    bytes += header.vtable.size;
                } else {
                    freed += 1;
                    unsafe { (header.vtable.drop)(h) };
                }
            }
            shard.head.store(kept, Ordering::Release);
            shard.objects.store(objects, Ordering::Relaxed);
            shard.bytes.store(bytes, Ordering::Relaxed);
        }
        CollectStats { marked: tracer.marked, freed }
    }
}

impl Drop for Heap {
    fn drop(&mut self) {
        for shard in self.shards.iter_mut() {
            let mut cur = *shard.head.get_mut();
            while let Some(h) = NonNull::new(cur) {
                let header = unsafe { h.as_ref() };
                cur = header.next.load(Ordering::Relaxed);
                unsafe { (header.vtable.drop)(h) };
            }
        }
    }
}

macro_rules! leaf_trace {
    ($($t:ty),*) => {
        $(unsafe impl Trace for $t {
            fn trace(&self, _: &mut Tracer) {}
        })*
    };
}

leaf_trace!(
    (), bool, u8, u16, u32, u64, usize, i8, i16, i32, i64, isize,
    std::sync::atomic::AtomicBool,
    std::sync::atomic::AtomicI64,
    std::sync::atomic::AtomicU64,
    std::sync::atomic::AtomicUsize
);

unsafe impl<T: Trace> Trace for Option<T> {
    fn trace(&self, tracer: &mut Tracer) {
        if let Some(v) = self {
            v.trace(tracer)
        }
    }
}

unsafe impl<T: Trace> Trace for [T] {
    fn trace(&self, tracer: &mut Tracer) {
        for v in self {
            v.trace(tracer)
        }
    }
}

unsafe impl<T: Trace> Trace for Vec<T> {
    fn trace(&self, tracer: &mut Tracer) {
        self.as_slice().trace(tracer)
    }
}

unsafe impl<T: Trace + ?Sized> Trace for Box<T> {
    fn trace(&self, tracer: &mut Tracer) {
        (**self).trace(tracer)
    }
}

unsafe impl<T: Trace + ?Sized> Trace for &T {
    fn trace(&self, tracer: &mut Tracer) {
        (**self).trace(tracer)
    }
}

unsafe impl<A: Trace, B: Trace> Trace for (A, B) {
    fn trace(&self, tracer: &mut Tracer) {
        self.0.trace(tracer);
        self.1.trace(tracer);
    }
}

unsafe impl<A: Trace, B: Trace, C: Trace> Trace for (A, B, C) {
    fn trace(&self, tracer: &mut Tracer) {
        self.0.trace(tracer);
        self.1.trace(tracer);
        self.2.trace(tracer);
    }
}
