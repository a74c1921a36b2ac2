//! Multiversion garbage collection workbench.
//!
//! Version lists ([`pdl`], [`ssl`]), a range-tracking reclamation engine
//! ([`tracker`]), four pluggable version-reclamation schemes ([`scheme`]),
//! two multiversion structures built on them ([`structures`]), test oracles
//! ([`oracle`]) and the benchmark harness ([`bench`]).

pub mod bench;
pub mod heap;
pub mod oracle;
pub mod pdl;
pub mod scheme;
pub mod ssl;
pub mod structures;
pub mod tracker;
pub mod ts;

pub use heap::{Gc, Heap, Trace, Tracer};
pub use scheme::{CellRef, Participant, Runtime, SchemeConfig, SchemeKind, VersionCell};
pub use ts::Timestamp;

/// Values stored in version lists.
///
/// `Default` is the bottom value returned for reads older than a cell.
/// `fingerprint` identifies a value in the shadow log; equal values must
/// have equal fingerprints.
pub trait Payload: Copy + Eq + Default + Send + Sync + Trace + 'static {
    fn fingerprint(&self) -> u64;
}

impl Payload for u64 {
    fn fingerprint(&self) -> u64 {
        *self
    }
}
