//! Query dispatch and inter-PE mutation propagation.
//!
//! Dispatch takes up to `p` queries per cycle off the trace head: non-search
//! queries round-robin over the `k` mutation-capable PEs (assigned first,
//! since only they can take them), searches round-robin over whatever PEs
//! remain free. Overflow either defers in order to the next cycle or is
//! rejected as an explicit contract violation.
//!
//! A committed mutation travels a ring of replicas in PE-index order, one
//! replica per cycle, starting with the emitting PE's own replica; the word
//! never changes en route. Messages from one owner advance in lockstep, so
//! per-owner commit order is preserved everywhere and no two writes can meet
//! at one (replica, bank) in one cycle.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::engine::{OpKind, Operation, Outcome};
use crate::xorstore::{DisciplineViolation, EncodedSlot, Replica};

/// An encoded write traveling the inter-PE pipeline.
#[derive(Debug, Clone)]
pub struct MutationMessage {
    /// Mutation index: which bank this write lands in, in every replica.
    /// Equals the emitting PE's index.
    pub owner: usize,
    pub entry: usize,
    pub slot: usize,
    /// Immutable after creation: every hop writes the same encoded data.
    pub word: EncodedSlot,
    pub hops_done: usize,
    pub trace_index: u64,
    pub kind: OpKind,
    pub key: u128,
    pub issue_cycle: u64,
    pub accept_cycle: u64,
    pub emit_cycle: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverflowMode {
    /// Queries that exceed per-cycle capacity wait, in order.
    #[default]
    Defer,
    /// Over-capacity queries come back as explicit contract violations.
    Reject,
}

/// A query pulled from the trace but not yet accepted by a PE.
#[derive(Debug, Clone)]
pub struct Pending {
    pub trace_index: u64,
    pub op: Operation,
    pub issue_cycle: u64,
}

#[derive(Debug, Default)]
pub struct CycleDispatch {
    /// `(pe index, query)` pairs accepted this cycle.
    pub assignments: Vec<(usize, Pending)>,
    /// Nonempty only in reject mode.
    pub rejected: Vec<Pending>,
    /// Queries pushed back to the defer queue this cycle.
    pub deferred: usize,
}

#[derive(Debug)]
pub struct Dispatcher {
    pe_count: usize,
    mutation_pes: usize,
    mode: OverflowMode,
    search_cursor: usize,
    nsq_cursor: usize,
    defer_queue: VecDeque<Pending>,
}

impl Dispatcher {
    pub fn new(pe_count: usize, mutation_pes: usize, mode: OverflowMode) -> Self {
        debug_assert!(mutation_pes >= 1 && mutation_pes <= pe_count);
        Self {
            pe_count,
            mutation_pes,
            mode,
            search_cursor: 0,
            nsq_cursor: 0,
            defer_queue: VecDeque::new(),
        }
    }

    pub fn defer_is_empty(&self) -> bool {
        self.defer_queue.is_empty()
    }

    /// Forms this cycle's batch (deferred queries first, then fresh pulls,
    /// at most `p` total) and assigns it to PEs.
    pub fn dispatch(
        &mut self,
        mut pull: impl FnMut() -> Option<Pending>,
        _cycle: u64,
    ) -> CycleDispatch {
        let p = self.pe_count;
        let k = self.mutation_pes;

        let mut batch: Vec<Pending> = Vec::with_capacity(p);
        while batch.len() < p {
            match self.defer_queue.pop_front() {
                Some(q) => batch.push(q),
                None => break,
            }
        }
        while batch.len() < p {
            match pull() {
                Some(q) => batch.push(q),
                None => break,
            }
        }

        let mut out = CycleDispatch::default();
        let mut pe_taken = alloc::vec![false; p];
        let mut placed = alloc::vec![false; batch.len()];

        // Non-search queries first: only the k mutation PEs can take them.
        let mut nsq_assigned = 0usize;
        for (i, q) in batch.iter().enumerate() {
            if q.op.is_nsq() && nsq_assigned < k {
                let pe = (self.nsq_cursor + nsq_assigned) % k;
                pe_taken[pe] = true;
                placed[i] = true;
                nsq_assigned += 1;
                out.assignments.push((pe, q.clone()));
            }
        }
        self.nsq_cursor = (self.nsq_cursor + nsq_assigned) % k;

        // Searches may use any PE still free this cycle.
        for (i, q) in batch.iter().enumerate() {
            if placed[i] || q.op.is_nsq() {
                continue;
            }
            let mut found = None;
            for step in 0..p {
                let pe = (self.search_cursor + step) % p;
                if !pe_taken[pe] {
                    found = Some(pe);
                    break;
                }
            }
            if let Some(pe) = found {
                pe_taken[pe] = true;
                placed[i] = true;
                self.search_cursor = (pe + 1) % p;
                out.assignments.push((pe, q.clone()));
            }
        }

        // Whatever could not be placed goes back in front, oldest first.
        for (i, q) in batch.into_iter().enumerate().rev() {
            if !placed[i] {
                match self.mode {
                    OverflowMode::Defer => {
                        self.defer_queue.push_front(q);
                        out.deferred += 1;
                    }
                    OverflowMode::Reject => out.rejected.push(q),
                }
            }
        }
        out.rejected.reverse();
        out
    }
}

/// One bank write was tampered with; test-only negative control for the
/// consistency checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSpec {
    /// Global index of the bank write to corrupt (hop writes counted across
    /// the whole run in apply order).
    pub write_index: u64,
}

/// Advances every in-flight message one hop: hop `h` (0-based) writes the
/// word into bank `owner` of replica `(owner + h) mod p`. A message retires
/// after `p` hops. Returns the retired messages in apply order.
pub fn propagate_step(
    messages: &mut Vec<MutationMessage>,
    replicas: &mut [Replica],
    cycle: u64,
    write_counter: &mut u64,
    fault: Option<FaultSpec>,
) -> Result<Vec<MutationMessage>, DisciplineViolation> {
    let p = replicas.len();
    for msg in messages.iter_mut() {
        let target = (msg.owner + msg.hops_done) % p;
        let mut word = msg.word;
        if let Some(f) = fault {
            if f.write_index == *write_counter {
                word.key_x ^= 1;
            }
        }
        replicas[target].bank_mut(msg.owner).apply_write(msg.entry, msg.slot, word, cycle)?;
        *write_counter += 1;
        msg.hops_done += 1;
    }
    let mut retired = Vec::new();
    let mut i = 0;
    while i < messages.len() {
        if messages[i].hops_done == p {
            retired.push(messages.remove(i));
        } else {
            i += 1;
        }
    }
    Ok(retired)
}
