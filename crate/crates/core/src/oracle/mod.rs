//! Ground truth for tests: needed sets, floor lookups, the shadow log
//! checker and the interleaving explorer.

pub mod check;
pub mod explore;
pub mod needed;
pub mod shadow;
