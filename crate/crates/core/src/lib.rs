//! Cycle-level model of a parallel hash table built on XOR-encoded banked
//! storage.
//!
//! The modeled machine is an array of `p` processing engines (PEs), each
//! holding a full replica of the table. A replica is split into `k`
//! single-read-single-write banks, and every stored word is an XOR fragment:
//! the XOR across all `k` banks at one (entry, slot) position yields the
//! actual key-value pair plus an occupancy parity bit. Mutations are owned by
//! one bank (one mutation-capable PE) each, so writes from different PEs can
//! never collide, and a mutation reaches all replicas through a one-hop-per-
//! cycle inter-PE pipeline.
//!
//! This crate is `no_std` (alloc only): it contains the hash family, the
//! storage algebra, the PE pipeline, the dispatch/propagation fabric, the
//! cycle loop, the consistency checker, capacity-planning arithmetic, and
//! workload generation. File and process concerns (CLI, trace files, report
//! files) live in the companion `xorht-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod consistency;
pub mod engine;
pub mod fabric;
pub mod h3;
pub mod pe;
pub mod resource;
pub mod rng;
pub mod workload;
pub mod xorstore;

pub use engine::{run, Operation, Outcome, QueryResult, SimConfig, SimReport};
pub use h3::H3Matrix;
pub use xorstore::{Bank, DecodedSlot, EncodedSlot, Replica};
