//! One processing engine: a fixed-depth pipeline of hash, parallel bank row
//! read, XOR reduction, and result resolution.
//!
//! One query enters per cycle and leaves exactly `t0` cycles later; there are
//! no stalls and no forwarding, so the pipeline is fully data-agnostic. The
//! bucket row is latched at the first read-stage cycle; both reduction trees
//! (decode for resolution, encode for the mutation word) operate on that
//! latch. A mutation-capable PE emits a `MutationMessage` at pipe exit; a
//! search-only PE has no mutation path at all and rejects non-search queries
//! at acceptance.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{Operation, Outcome, QueryResult};
use crate::fabric::MutationMessage;
use crate::xorstore::{DecodedSlot, DisciplineViolation, Replica};

/// Per-stage cycle counts. Each stage is at least one cycle deep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLatencies {
    pub hash: u32,
    pub read: u32,
    pub xor_tree: u32,
    pub resolve: u32,
}

impl StageLatencies {
    /// Pipeline depth `t0` in cycles.
    pub fn total(&self) -> u64 {
        self.hash as u64 + self.read as u64 + self.xor_tree as u64 + self.resolve as u64
    }

    pub fn valid(&self) -> bool {
        self.hash >= 1 && self.read >= 1 && self.xor_tree >= 1 && self.resolve >= 1
    }
}

impl Default for StageLatencies {
    /// hash 1, read 1, xor tree 2, resolve 1: a 5-deep pipe, which at
    /// 370 MHz puts a search at 13.5 ns.
    fn default() -> Self {
        StageLatencies { hash: 1, read: 1, xor_tree: 2, resolve: 1 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PeConfig {
    pub pe_id: usize,
    /// Mutation ownership: `Some(bank)` for mutation-capable PEs, `None` for
    /// search-only PEs.
    pub owner: Option<usize>,
    pub stages: StageLatencies,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeError {
    /// A non-search query was routed to a search-only PE: a dispatcher bug.
    RoutingContract { pe: usize, trace_index: u64 },
    /// Two queries offered to one PE in one cycle: a dispatcher bug.
    AcceptClash { pe: usize, cycle: u64 },
}

impl fmt::Display for PeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeError::RoutingContract { pe, trace_index } => write!(
                f,
                "routing contract violated: non-search query {trace_index} offered to search-only PE {pe}"
            ),
            PeError::AcceptClash { pe, cycle } => {
                write!(f, "PE {pe} offered a second query in cycle {cycle}")
            }
        }
    }
}

impl core::error::Error for PeError {}

/// What the resolution unit decided for one decoded row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveOutcome {
    /// Lowest slot whose occupied key equals the query key.
    MatchSlot(usize),
    /// Lowest unoccupied slot (insert/update with no match).
    OpenSlot(usize),
    /// Insert/update with no match and no open slot.
    BucketFull,
    /// Search/delete with no match.
    NotFound,
}

/// Probes every slot: a key match wins over an open slot, so an update of an
/// existing key never consumes a new slot.
pub fn resolve(row: &[DecodedSlot], op: &Operation) -> ResolveOutcome {
    let key = op.key();
    for (s, d) in row.iter().enumerate() {
        if d.occupied && d.key == key {
            return ResolveOutcome::MatchSlot(s);
        }
    }
    if op.wants_slot() {
        match row.iter().position(|d| !d.occupied) {
            Some(s) => ResolveOutcome::OpenSlot(s),
            None => ResolveOutcome::BucketFull,
        }
    } else {
        ResolveOutcome::NotFound
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    trace_index: u64,
    op: Operation,
    issue_cycle: u64,
    accept_cycle: u64,
    bucket: usize,
    latch: Option<crate::xorstore::RowLatch>,
}

/// Output of one pipe exit.
#[derive(Debug, Clone)]
pub enum PeOutput {
    /// Searches, misses, and failed inserts complete at pipe exit.
    Completed(QueryResult),
    /// Committed mutations leave as an encoded write heading for bank
    /// `owner` of every replica.
    Mutation(MutationMessage),
}

#[derive(Debug)]
pub struct ProcessingEngine {
    cfg: PeConfig,
    in_flight: VecDeque<InFlight>,
    last_accept_cycle: Option<u64>,
}

impl ProcessingEngine {
    pub fn new(cfg: PeConfig) -> Self {
        Self { cfg, in_flight: VecDeque::new(), last_accept_cycle: None }
    }

    pub fn pe_id(&self) -> usize {
        self.cfg.pe_id
    }

    pub fn owner(&self) -> Option<usize> {
        self.cfg.owner
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty()
    }

    /// Accepts one query into the hash stage.
    pub fn accept(
        &mut self,
        trace_index: u64,
        op: Operation,
        bucket: usize,
        issue_cycle: u64,
        cycle: u64,
    ) -> Result<(), PeError> {
        if op.is_nsq() && self.cfg.owner.is_none() {
            return Err(PeError::RoutingContract { pe: self.cfg.pe_id, trace_index });
        }
        if self.last_accept_cycle == Some(cycle) {
            return Err(PeError::AcceptClash { pe: self.cfg.pe_id, cycle });
        }
        self.last_accept_cycle = Some(cycle);
        self.in_flight.push_back(InFlight {
            trace_index,
            op,
            issue_cycle,
            accept_cycle: cycle,
            bucket,
            latch: None,
        });
        Ok(())
    }

    /// Advances every in-flight query one cycle. Must be called exactly once
    /// per simulated cycle after this cycle's acceptance.
    pub fn step(
        &mut self,
        cycle: u64,
        replica: &mut Replica,
    ) -> Result<Vec<PeOutput>, DisciplineViolation> {
        let read_at = self.cfg.stages.hash as u64;
        let exit_at = self.cfg.stages.total();

        for q in self.in_flight.iter_mut() {
            if cycle == q.accept_cycle + read_at {
                q.latch = Some(replica.latch_row(q.bucket, cycle)?);
            }
        }

        let mut out = Vec::new();
        while let Some(front) = self.in_flight.front() {
            if cycle != front.accept_cycle + exit_at {
                break;
            }
            let q = self.in_flight.pop_front().expect("front checked");
            out.push(self.finish(q, cycle));
        }
        Ok(out)
    }

    fn finish(&self, q: InFlight, cycle: u64) -> PeOutput {
        let latch = q.latch.expect("row latched before pipe exit");
        let row = latch.decode_row();
        let resolution = resolve(&row, &q.op);

        let completed = |outcome: Outcome| {
            PeOutput::Completed(QueryResult {
                trace_index: q.trace_index,
                kind: q.op.kind(),
                key: q.op.key(),
                pe: self.cfg.pe_id,
                issue_cycle: q.issue_cycle,
                accept_cycle: q.accept_cycle,
                complete_cycle: cycle,
                outcome,
            })
        };
        let mutation = |slot: usize, word, outcome| {
            PeOutput::Mutation(MutationMessage {
                owner: self.cfg.owner.expect("NSQ only on mutation-capable PEs"),
                entry: q.bucket,
                slot,
                word,
                hops_done: 0,
                trace_index: q.trace_index,
                kind: q.op.kind(),
                key: q.op.key(),
                issue_cycle: q.issue_cycle,
                accept_cycle: q.accept_cycle,
                emit_cycle: cycle,
                outcome,
            })
        };

        match q.op {
            Operation::Search { .. } => match resolution {
                ResolveOutcome::MatchSlot(s) => completed(Outcome::Found(row[s].value)),
                _ => completed(Outcome::NotFound),
            },
            Operation::Insert { key, value } | Operation::Update { key, value } => {
                let owner = self.cfg.owner.expect("NSQ only on mutation-capable PEs");
                match resolution {
                    ResolveOutcome::MatchSlot(s) => {
                        mutation(s, latch.encode_upsert(owner, s, key, value), Outcome::Updated)
                    }
                    ResolveOutcome::OpenSlot(s) => {
                        mutation(s, latch.encode_upsert(owner, s, key, value), Outcome::Inserted)
                    }
                    ResolveOutcome::BucketFull => completed(Outcome::InsertFailed),
                    ResolveOutcome::NotFound => unreachable!("upsert always gets a slot verdict"),
                }
            }
            Operation::Delete { .. } => {
                let owner = self.cfg.owner.expect("NSQ only on mutation-capable PEs");
                match resolution {
                    ResolveOutcome::MatchSlot(s) => {
                        mutation(s, latch.encode_delete(owner, s), Outcome::Deleted)
                    }
                    _ => completed(Outcome::NotFound),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xorstore::SlotGeometry;
    use alloc::vec;

    fn occ(key: u128, value: u128) -> DecodedSlot {
        DecodedSlot { occupied: true, key, value }
    }

    fn open() -> DecodedSlot {
        DecodedSlot { occupied: false, key: 0, value: 0 }
    }

    #[test]
    fn resolve_match_beats_open() {
        let row = vec![open(), occ(9, 90)];
        assert_eq!(
            resolve(&row, &Operation::Update { key: 9, value: 91 }),
            ResolveOutcome::MatchSlot(1)
        );
    }

    #[test]
    fn resolve_search_hit_and_miss() {
        let row = vec![occ(5, 50), open()];
        assert_eq!(resolve(&row, &Operation::Search { key: 5 }), ResolveOutcome::MatchSlot(0));
        assert_eq!(resolve(&row, &Operation::Search { key: 6 }), ResolveOutcome::NotFound);
    }

    #[test]
    fn resolve_insert_takes_first_open_slot() {
        let row = vec![occ(1, 10), open(), open(), open()];
        assert_eq!(
            resolve(&row, &Operation::Insert { key: 2, value: 20 }),
            ResolveOutcome::OpenSlot(1)
        );
    }

    #[test]
    fn resolve_full_bucket() {
        let row = vec![occ(1, 0), occ(2, 0)];
        assert_eq!(
            resolve(&row, &Operation::Insert { key: 3, value: 0 }),
            ResolveOutcome::BucketFull
        );
        assert_eq!(resolve(&row, &Operation::Delete { key: 3 }), ResolveOutcome::NotFound);
    }

    #[test]
    fn search_only_pe_rejects_nsq() {
        let mut pe = ProcessingEngine::new(PeConfig {
            pe_id: 4,
            owner: None,
            stages: StageLatencies::default(),
        });
        assert!(pe.accept(0, Operation::Search { key: 1 }, 0, 0, 0).is_ok());
        let err = pe.accept(1, Operation::Insert { key: 1, value: 2 }, 0, 1, 1);
        assert_eq!(err, Err(PeError::RoutingContract { pe: 4, trace_index: 1 }));
    }

    #[test]
    fn one_query_per_pe_per_cycle() {
        let mut pe = ProcessingEngine::new(PeConfig {
            pe_id: 0,
            owner: Some(0),
            stages: StageLatencies::default(),
        });
        pe.accept(0, Operation::Search { key: 1 }, 0, 0, 7).unwrap();
        assert_eq!(
            pe.accept(1, Operation::Search { key: 2 }, 0, 0, 7),
            Err(PeError::AcceptClash { pe: 0, cycle: 7 })
        );
    }

    /// Drives one PE and one replica through `cycles` cycles, feeding
    /// queries at their scheduled accept cycle.
    fn drive(
        pe: &mut ProcessingEngine,
        replica: &mut Replica,
        feed: &[(u64, Operation)],
        cycles: u64,
    ) -> Vec<PeOutput> {
        let entries = replica.entries();
        let mut out = Vec::new();
        for cycle in 0..cycles {
            for (i, (at, op)) in feed.iter().enumerate() {
                if *at == cycle {
                    let bucket = op.key() as usize % entries;
                    pe.accept(i as u64, *op, bucket, cycle, cycle).unwrap();
                }
            }
            out.extend(pe.step(cycle, replica).unwrap());
        }
        out
    }

    #[test]
    fn search_exits_exactly_t0_cycles_after_accept() {
        let stages = StageLatencies::default();
        let mut pe = ProcessingEngine::new(PeConfig { pe_id: 0, owner: Some(0), stages });
        let mut replica = Replica::new(1, 8, 2, SlotGeometry::new(32, 32));
        let out = drive(&mut pe, &mut replica, &[(3, Operation::Search { key: 5 })], 20);
        assert_eq!(out.len(), 1);
        match &out[0] {
            PeOutput::Completed(r) => {
                assert_eq!(r.outcome, Outcome::NotFound);
                assert_eq!(r.complete_cycle - r.accept_cycle, stages.total());
            }
            other => panic!("expected completed search, got {other:?}"),
        }
    }

    #[test]
    fn insert_emits_message_with_fresh_word_at_t0() {
        let stages = StageLatencies::default();
        let mut pe = ProcessingEngine::new(PeConfig { pe_id: 0, owner: Some(0), stages });
        let mut replica = Replica::new(1, 8, 2, SlotGeometry::new(32, 32));
        let op = Operation::Insert { key: 6, value: 60 };
        let out = drive(&mut pe, &mut replica, &[(0, op)], 10);
        assert_eq!(out.len(), 1);
        match &out[0] {
            PeOutput::Mutation(m) => {
                assert_eq!(m.emit_cycle, stages.total());
                assert_eq!(m.owner, 0);
                assert_eq!(m.entry, 6 % 8);
                assert_eq!(m.slot, 0);
                assert_eq!(m.word.key_x, 6);
                assert_eq!(m.word.value_x, 60);
                assert!(m.word.occ_x);
                assert_eq!(m.outcome, Outcome::Inserted);
            }
            other => panic!("expected mutation, got {other:?}"),
        }
    }

    #[test]
    fn insert_into_full_bucket_fails_without_mutation() {
        let stages = StageLatencies::default();
        let mut pe = ProcessingEngine::new(PeConfig { pe_id: 0, owner: Some(0), stages });
        let mut replica = Replica::new(1, 4, 2, SlotGeometry::new(32, 32));
        // Pre-fill bucket 0 with two other keys.
        for (cycle, key) in [(0u64, 4u128), (1, 8)] {
            let w = replica.encode_upsert(0, 0, (cycle) as usize, key, 1);
            replica.bank_mut(0).apply_write(0, cycle as usize, w, cycle).unwrap();
        }
        let out = drive(&mut pe, &mut replica, &[(5, Operation::Insert { key: 12, value: 3 })], 20);
        assert_eq!(out.len(), 1);
        match &out[0] {
            PeOutput::Completed(r) => assert_eq!(r.outcome, Outcome::InsertFailed),
            other => panic!("expected failed insert, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_accepts_every_cycle_same_bucket() {
        // Adversarial single-bucket stream: one accept per cycle, one exit
        // per cycle once the pipe fills, no stalls.
        let stages = StageLatencies::default();
        let mut pe = ProcessingEngine::new(PeConfig { pe_id: 0, owner: Some(0), stages });
        let mut replica = Replica::new(1, 4, 2, SlotGeometry::new(32, 32));
        let mut exits = 0;
        for cycle in 0..100u64 {
            pe.accept(cycle, Operation::Search { key: 4 }, 0, cycle, cycle).unwrap();
            let outs = pe.step(cycle, &mut replica).unwrap();
            if cycle >= stages.total() {
                assert_eq!(outs.len(), 1);
            }
            exits += outs.len();
        }
        assert_eq!(exits as u64, 100 - stages.total());
    }
}
