//! Teleportation of a free massive scalar particle, end to end: the symbolic
//! pairing algebra behind the transition amplitude, mass-shell propagator
//! evaluation in 1+1 and 3+1 dimensions, lattice measurement families with
//! completeness diagnostics, and the non-relativistic limit where the protocol
//! becomes exact.
//!
//! Everything numerical is deterministic: identical inputs produce identical
//! bytes regardless of thread count. Heavy scans go through [`par::map_slice`],
//! which preserves ordering so reductions are reproducible.

pub mod amplitude;
pub mod conventions;
pub mod measurement;
pub mod nonrel;
pub mod numerics;
pub mod par;
pub mod propagator;
pub mod states;
pub mod wick;
