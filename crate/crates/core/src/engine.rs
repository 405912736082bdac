//! The cycle loop: dispatch, PE steps, mutation propagation, completion
//! stamping, and throughput/latency accounting.
//!
//! Per cycle, in order: up to `p` queries are pulled and accepted, every PE
//! advances one cycle (bank reads sample the state left by the previous
//! cycle), then every in-flight mutation applies one hop write. A search
//! completes `t0` cycles after acceptance; a committed mutation completes at
//! its last replica write, `t0 + p - 1` cycles after acceptance. After the
//! last acceptance the loop runs `p + t0` drain cycles so everything lands.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::fabric::{
    propagate_step, Dispatcher, FaultSpec, MutationMessage, OverflowMode, Pending,
};
use crate::h3::{H3Error, H3Matrix};
use crate::pe::{PeConfig, PeError, PeOutput, ProcessingEngine, StageLatencies};
use crate::xorstore::{DisciplineViolation, EncodedSlot, Replica, SlotGeometry};

/// A typed hash table operation. Insert and update share upsert semantics:
/// an existing key is overwritten in place, a new key takes the first open
/// slot of its bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Search { key: u128 },
    Insert { key: u128, value: u128 },
    Update { key: u128, value: u128 },
    Delete { key: u128 },
}

impl Operation {
    pub fn key(&self) -> u128 {
        match *self {
            Operation::Search { key }
            | Operation::Insert { key, .. }
            | Operation::Update { key, .. }
            | Operation::Delete { key } => key,
        }
    }

    pub fn value(&self) -> Option<u128> {
        match *self {
            Operation::Insert { value, .. } | Operation::Update { value, .. } => Some(value),
            _ => None,
        }
    }

    /// Non-search query: anything that mutates the table.
    pub fn is_nsq(&self) -> bool {
        !matches!(self, Operation::Search { .. })
    }

    /// True for operations that need a slot verdict (match or open).
    pub fn wants_slot(&self) -> bool {
        matches!(self, Operation::Insert { .. } | Operation::Update { .. })
    }

    pub fn kind(&self) -> OpKind {
        match self {
            Operation::Search { .. } => OpKind::Search,
            Operation::Insert { .. } => OpKind::Insert,
            Operation::Update { .. } => OpKind::Update,
            Operation::Delete { .. } => OpKind::Delete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpKind {
    Search,
    Insert,
    Update,
    Delete,
}

impl OpKind {
    pub fn label(&self) -> &'static str {
        match self {
            OpKind::Search => "search",
            OpKind::Insert => "insert",
            OpKind::Update => "update",
            OpKind::Delete => "delete",
        }
    }

    pub const ALL: [OpKind; 4] = [OpKind::Search, OpKind::Insert, OpKind::Update, OpKind::Delete];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Found(u128),
    /// Search miss or delete of an absent key.
    NotFound,
    Inserted,
    Updated,
    Deleted,
    InsertFailed,
    /// Reject-mode overflow: the query was never accepted.
    CapacityViolation,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Found(_) => "found",
            Outcome::NotFound => "none",
            Outcome::Inserted => "inserted",
            Outcome::Updated => "updated",
            Outcome::Deleted => "deleted",
            Outcome::InsertFailed => "insert_failed",
            Outcome::CapacityViolation => "capacity_violation",
        }
    }

    /// True for mutations that actually wrote the table.
    pub fn committed(&self) -> bool {
        matches!(self, Outcome::Inserted | Outcome::Updated | Outcome::Deleted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryResult {
    pub trace_index: u64,
    pub kind: OpKind,
    pub key: u128,
    pub pe: usize,
    pub issue_cycle: u64,
    pub accept_cycle: u64,
    /// Searches: result emission. Mutations: final replica commit.
    pub complete_cycle: u64,
    pub outcome: Outcome,
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// PE count `p`.
    pub pe_count: usize,
    /// Mutation-capable PE count `k`; the NSQ ratio is `k / p`.
    pub mutation_pes: usize,
    /// Buckets; must be a power of two (the index is `log2(entries)` bits).
    pub entries: u64,
    /// Slots per bucket, 1..=8.
    pub slots: usize,
    pub key_bits: u32,
    pub value_bits: u32,
    pub stages: StageLatencies,
    pub clock_mhz: f64,
    pub seed: u64,
    pub overflow_mode: OverflowMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pe_count: 1,
            mutation_pes: 1,
            entries: 256,
            slots: 4,
            key_bits: 32,
            value_bits: 32,
            stages: StageLatencies::default(),
            clock_mhz: 370.375,
            seed: 1,
            overflow_mode: OverflowMode::Defer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    PeCountZero,
    MutationPesOutOfRange { k: usize, p: usize },
    EntriesNotPowerOfTwo(u64),
    SlotsOutOfRange(usize),
    KeyBitsOutOfRange(u32),
    ValueBitsOutOfRange(u32),
    StageLatencyZero,
    ClockNotPositive,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::PeCountZero => write!(f, "pe_count: must be at least 1"),
            ConfigError::MutationPesOutOfRange { k, p } => {
                write!(f, "mutation_pes: {k} not in 1..={p} (pe_count)")
            }
            ConfigError::EntriesNotPowerOfTwo(e) => {
                write!(f, "entries: {e} is not a power of two >= 2")
            }
            ConfigError::SlotsOutOfRange(s) => write!(f, "slots: {s} not in 1..=8"),
            ConfigError::KeyBitsOutOfRange(b) => write!(f, "key_bits: {b} not in 1..=128"),
            ConfigError::ValueBitsOutOfRange(b) => write!(f, "value_bits: {b} not in 1..=128"),
            ConfigError::StageLatencyZero => {
                write!(f, "stage_latencies: every stage needs at least one cycle")
            }
            ConfigError::ClockNotPositive => write!(f, "clock_mhz: must be positive"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pe_count == 0 {
            return Err(ConfigError::PeCountZero);
        }
        if self.mutation_pes == 0 || self.mutation_pes > self.pe_count {
            return Err(ConfigError::MutationPesOutOfRange {
                k: self.mutation_pes,
                p: self.pe_count,
            });
        }
        if self.entries < 2 || !self.entries.is_power_of_two() {
            return Err(ConfigError::EntriesNotPowerOfTwo(self.entries));
        }
        if self.slots == 0 || self.slots > 8 {
            return Err(ConfigError::SlotsOutOfRange(self.slots));
        }
        if self.key_bits == 0 || self.key_bits > 128 {
            return Err(ConfigError::KeyBitsOutOfRange(self.key_bits));
        }
        if self.value_bits == 0 || self.value_bits > 128 {
            return Err(ConfigError::ValueBitsOutOfRange(self.value_bits));
        }
        if !self.stages.valid() {
            return Err(ConfigError::StageLatencyZero);
        }
        if !(self.clock_mhz > 0.0) {
            return Err(ConfigError::ClockNotPositive);
        }
        Ok(())
    }

    pub fn index_bits(&self) -> u32 {
        self.entries.trailing_zeros()
    }

    /// Pipeline depth in cycles.
    pub fn t0(&self) -> u64 {
        self.stages.total()
    }

    /// The conflict window: a mutation is not yet visible to every PE for up
    /// to this many cycles from acceptance.
    pub fn window(&self) -> u64 {
        self.pe_count as u64 + self.t0()
    }

    /// Cycle offset from acceptance at which the bank row is sampled.
    pub fn read_offset(&self) -> u64 {
        self.stages.hash as u64
    }

    pub fn geometry(&self) -> SlotGeometry {
        SlotGeometry::new(self.key_bits, self.value_bits)
    }

    pub fn build_matrix(&self) -> Result<H3Matrix, H3Error> {
        H3Matrix::new(self.key_bits, self.index_bits(), self.seed)
    }
}

/// One committed hop-1 write, kept for post-run analysis: this is exactly
/// what the simulation wrote into bank `owner` of each replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitRecord {
    pub trace_index: u64,
    pub owner: usize,
    pub entry: usize,
    pub slot: usize,
    pub word: EncodedSlot,
    pub emit_cycle: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub found: u64,
    pub not_found: u64,
    pub inserted: u64,
    pub updated: u64,
    pub deleted: u64,
    pub insert_failed: u64,
    pub capacity_violation: u64,
}

impl OutcomeCounts {
    fn bump(&mut self, outcome: &Outcome) {
        match outcome {
            Outcome::Found(_) => self.found += 1,
            Outcome::NotFound => self.not_found += 1,
            Outcome::Inserted => self.inserted += 1,
            Outcome::Updated => self.updated += 1,
            Outcome::Deleted => self.deleted += 1,
            Outcome::InsertFailed => self.insert_failed += 1,
            Outcome::CapacityViolation => self.capacity_violation += 1,
        }
    }
}

/// Completion-latency summary for one class of queries, in cycles.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencySummary {
    pub count: u64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    pub mean_cycles: f64,
}

impl LatencySummary {
    fn from_iter(values: impl Iterator<Item = u64>) -> Self {
        let mut count = 0u64;
        let mut min = u64::MAX;
        let mut max = 0u64;
        let mut sum = 0u128;
        for v in values {
            count += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v as u128;
        }
        if count == 0 {
            LatencySummary::default()
        } else {
            LatencySummary {
                count,
                min_cycles: min,
                max_cycles: max,
                mean_cycles: sum as f64 / count as f64,
            }
        }
    }

    pub fn mean_ns(&self, clock_mhz: f64) -> f64 {
        cycles_to_ns(self.mean_cycles, clock_mhz)
    }
}

/// One cycle at `clock_mhz` MHz lasts `1000 / clock_mhz` nanoseconds.
pub fn cycles_to_ns(cycles: f64, clock_mhz: f64) -> f64 {
    cycles / clock_mhz * 1000.0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyReport {
    pub per_op: BTreeMap<OpKind, LatencySummary>,
    /// All searches (always exactly `t0` cycles).
    pub search: LatencySummary,
    /// Mutations that committed (always exactly `t0 + p - 1` cycles).
    pub committed_nsq: LatencySummary,
}

/// Completion latencies per operation class, from per-query results.
/// Capacity violations never entered the pipeline and are skipped.
pub fn measure_latency(results: &[QueryResult], _clock_mhz: f64) -> LatencyReport {
    let accepted = |r: &&QueryResult| r.outcome != Outcome::CapacityViolation;
    let mut per_op = BTreeMap::new();
    for kind in OpKind::ALL {
        let summary = LatencySummary::from_iter(
            results
                .iter()
                .filter(accepted)
                .filter(|r| r.kind == kind)
                .map(|r| r.complete_cycle - r.accept_cycle),
        );
        if summary.count > 0 {
            per_op.insert(kind, summary);
        }
    }
    let search = per_op.get(&OpKind::Search).copied().unwrap_or_default();
    let committed_nsq = LatencySummary::from_iter(
        results
            .iter()
            .filter(|r| r.outcome.committed())
            .map(|r| r.complete_cycle - r.accept_cycle),
    );
    LatencyReport { per_op, search, committed_nsq }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub pe_count: usize,
    pub mutation_pes: usize,
    pub t0: u64,
    pub clock_mhz: f64,
    /// All simulated cycles, drain included.
    pub total_cycles: u64,
    /// Cycles excluding the final `p + t0` drain.
    pub steady_cycles: u64,
    pub accepted_queries: u64,
    pub completed_queries: u64,
    /// Cycles in which at least one query could not be dispatched.
    pub deferred_cycles: u64,
    pub deferred_queries: u64,
    /// Always zero: a violation halts the run instead.
    pub discipline_violations: u64,
    /// completed / total_cycles * clock.
    pub raw_mops: f64,
    /// completed / steady_cycles * clock; the headline number.
    pub steady_mops: f64,
    pub outcomes: OutcomeCounts,
    pub latency: LatencyReport,
    /// Completion-latency histogram (cycles -> count) per operation.
    pub histograms: BTreeMap<OpKind, BTreeMap<u64, u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(ConfigError),
    Hash(H3Error),
    Discipline(DisciplineViolation),
    Pe(PeError),
    /// Trace record whose key does not fit `key_bits`.
    KeyOutOfRange { trace_index: u64 },
    ValueOutOfRange { trace_index: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "invalid config: {e}"),
            SimError::Hash(e) => write!(f, "hash setup failed: {e}"),
            SimError::Discipline(e) => write!(f, "halt: {e}"),
            SimError::Pe(e) => write!(f, "halt: {e}"),
            SimError::KeyOutOfRange { trace_index } => {
                write!(f, "trace record {trace_index}: key does not fit key_bits")
            }
            SimError::ValueOutOfRange { trace_index } => {
                write!(f, "trace record {trace_index}: value does not fit value_bits")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}

impl From<DisciplineViolation> for SimError {
    fn from(e: DisciplineViolation) -> Self {
        SimError::Discipline(e)
    }
}

impl From<PeError> for SimError {
    fn from(e: PeError) -> Self {
        SimError::Pe(e)
    }
}

/// Everything a run produces: the report, per-query results in trace order,
/// the committed write log, and the final replicas.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SimReport,
    pub results: Vec<QueryResult>,
    pub commits: Vec<CommitRecord>,
    pub replicas: Vec<Replica>,
    pub matrix: H3Matrix,
}

pub fn run(config: &SimConfig, trace: &[Operation]) -> Result<RunOutput, SimError> {
    run_with_fault(config, trace, None)
}

/// `run` plus an optional single-write corruption, used as a negative
/// control for the consistency checker.
pub fn run_with_fault(
    config: &SimConfig,
    trace: &[Operation],
    fault: Option<FaultSpec>,
) -> Result<RunOutput, SimError> {
    config.validate()?;
    let matrix = config.build_matrix().map_err(SimError::Hash)?;

    let key_mask = config.geometry().key_mask();
    let value_mask = config.geometry().value_mask();
    for (i, op) in trace.iter().enumerate() {
        if op.key() & !key_mask != 0 {
            return Err(SimError::KeyOutOfRange { trace_index: i as u64 });
        }
        if op.value().is_some_and(|v| v & !value_mask != 0) {
            return Err(SimError::ValueOutOfRange { trace_index: i as u64 });
        }
    }

    let p = config.pe_count;
    let k = config.mutation_pes;
    let t0 = config.t0();
    let window = config.window();
    let geometry = config.geometry();

    let mut replicas: Vec<Replica> = (0..p)
        .map(|_| Replica::new(k, config.entries as usize, config.slots, geometry))
        .collect();
    let mut pes: Vec<ProcessingEngine> = (0..p)
        .map(|i| {
            ProcessingEngine::new(PeConfig {
                pe_id: i,
                owner: (i < k).then_some(i),
                stages: config.stages,
            })
        })
        .collect();
    let mut dispatcher = Dispatcher::new(p, k, config.overflow_mode);
    let mut messages: Vec<MutationMessage> = Vec::new();
    let mut results: Vec<Option<QueryResult>> = alloc::vec![None; trace.len()];
    let mut commits: Vec<CommitRecord> = Vec::new();

    let mut next_trace = 0usize;
    let mut last_accept: Option<u64> = None;
    let mut accepted = 0u64;
    let mut deferred_cycles = 0u64;
    let mut deferred_queries = 0u64;
    let mut write_counter = 0u64;
    let mut cycle = 0u64;

    loop {
        let intake_done = next_trace >= trace.len() && dispatcher.defer_is_empty();
        if intake_done {
            match last_accept {
                None => break,
                Some(la) if cycle > la + window => break,
                _ => {}
            }
        }

        // Dispatch: deferred queries first, then the trace head.
        let dispatch = {
            let trace_ref = trace;
            let next = &mut next_trace;
            dispatcher.dispatch(
                || {
                    if *next < trace_ref.len() {
                        let i = *next;
                        *next += 1;
                        Some(Pending {
                            trace_index: i as u64,
                            op: trace_ref[i],
                            issue_cycle: cycle,
                        })
                    } else {
                        None
                    }
                },
                cycle,
            )
        };
        if dispatch.deferred > 0 {
            deferred_cycles += 1;
            deferred_queries += dispatch.deferred as u64;
        }
        for q in dispatch.rejected {
            results[q.trace_index as usize] = Some(QueryResult {
                trace_index: q.trace_index,
                kind: q.op.kind(),
                key: q.op.key(),
                pe: usize::MAX,
                issue_cycle: q.issue_cycle,
                accept_cycle: cycle,
                complete_cycle: cycle,
                outcome: Outcome::CapacityViolation,
            });
        }
        for (pe, q) in dispatch.assignments {
            let bucket = matrix.hash(q.op.key()) as usize;
            pes[pe].accept(q.trace_index, q.op, bucket, q.issue_cycle, cycle)?;
            last_accept = Some(cycle);
            accepted += 1;
        }

        // PE phase: reads sample the state left by the previous cycle.
        for (pe, replica) in pes.iter_mut().zip(replicas.iter_mut()) {
            for output in pe.step(cycle, replica)? {
                match output {
                    PeOutput::Completed(r) => {
                        debug_assert_eq!(r.complete_cycle - r.accept_cycle, t0);
                        results[r.trace_index as usize] = Some(r);
                    }
                    PeOutput::Mutation(m) => {
                        commits.push(CommitRecord {
                            trace_index: m.trace_index,
                            owner: m.owner,
                            entry: m.entry,
                            slot: m.slot,
                            word: m.word,
                            emit_cycle: m.emit_cycle,
                        });
                        messages.push(m);
                    }
                }
            }
        }

        // Propagation phase: hop 1 of a fresh message is its local commit.
        let retired = propagate_step(&mut messages, &mut replicas, cycle, &mut write_counter, fault)?;
        for m in retired {
            debug_assert_eq!(cycle - m.accept_cycle, t0 + p as u64 - 1);
            results[m.trace_index as usize] = Some(QueryResult {
                trace_index: m.trace_index,
                kind: m.kind,
                key: m.key,
                pe: m.owner,
                issue_cycle: m.issue_cycle,
                accept_cycle: m.accept_cycle,
                complete_cycle: cycle,
                outcome: m.outcome,
            });
        }

        cycle += 1;
    }

    debug_assert!(messages.is_empty() && pes.iter().all(|pe| pe.is_idle()));

    let results: Vec<QueryResult> = results
        .into_iter()
        .map(|r| r.expect("every trace record completes by drain"))
        .collect();

    let total_cycles = cycle;
    let steady_cycles = total_cycles.saturating_sub(window);
    let mut outcomes = OutcomeCounts::default();
    for r in &results {
        outcomes.bump(&r.outcome);
    }
    let completed = results.len() as u64 - outcomes.capacity_violation;

    let mops = |cycles: u64| {
        if cycles == 0 {
            0.0
        } else {
            completed as f64 / cycles as f64 * config.clock_mhz
        }
    };
    let raw_mops = mops(total_cycles);
    let steady_mops = mops(steady_cycles);
    debug_assert!(steady_mops <= p as f64 * config.clock_mhz * (1.0 + 1e-9));

    let latency = measure_latency(&results, config.clock_mhz);
    let mut histograms: BTreeMap<OpKind, BTreeMap<u64, u64>> = BTreeMap::new();
    for r in &results {
        if r.outcome != Outcome::CapacityViolation {
            *histograms
                .entry(r.kind)
                .or_default()
                .entry(r.complete_cycle - r.accept_cycle)
                .or_default() += 1;
        }
    }

    let report = SimReport {
        pe_count: p,
        mutation_pes: k,
        t0,
        clock_mhz: config.clock_mhz,
        total_cycles,
        steady_cycles,
        accepted_queries: accepted,
        completed_queries: completed,
        deferred_cycles,
        deferred_queries,
        discipline_violations: 0,
        raw_mops,
        steady_mops,
        outcomes,
        latency,
        histograms,
    };

    Ok(RunOutput { report, results, commits, replicas, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn config(p: usize, k: usize) -> SimConfig {
        SimConfig { pe_count: p, mutation_pes: k, entries: 64, ..SimConfig::default() }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SimConfig { pe_count: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { mutation_pes: 5, pe_count: 4, ..SimConfig::default() }
            .validate()
            .is_err());
        assert!(SimConfig { entries: 100, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { slots: 9, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { clock_mhz: 0.0, ..SimConfig::default() }.validate().is_err());
    }

    #[test]
    fn empty_trace_reports_zero() {
        let out = run(&config(4, 2), &[]).unwrap();
        assert_eq!(out.report.total_cycles, 0);
        assert_eq!(out.report.completed_queries, 0);
        assert_eq!(out.report.raw_mops, 0.0);
    }

    #[test]
    fn rejects_out_of_range_keys() {
        let cfg = SimConfig { key_bits: 8, ..config(1, 1) };
        let err = run(&cfg, &[Operation::Search { key: 0x1ff }]);
        assert_eq!(err.unwrap_err(), SimError::KeyOutOfRange { trace_index: 0 });
    }

    #[test]
    fn insert_then_search_after_drain() {
        let cfg = config(1, 1);
        let window = cfg.window() as usize;
        let mut trace = vec![Operation::Insert { key: 42, value: 420 }];
        // Unrelated searches keep the pipe busy past the conflict window.
        trace.extend((0..window).map(|i| Operation::Search { key: 1000 + i as u128 }));
        trace.push(Operation::Search { key: 42 });
        let out = run(&cfg, &trace).unwrap();
        assert_eq!(out.results[0].outcome, Outcome::Inserted);
        assert_eq!(out.results.last().unwrap().outcome, Outcome::Found(420));
    }

    #[test]
    fn latency_invariants_hold() {
        let cfg = config(4, 2);
        let t0 = cfg.t0();
        let p = cfg.pe_count as u64;
        let trace = vec![
            Operation::Insert { key: 1, value: 10 },
            Operation::Search { key: 2 },
            Operation::Delete { key: 3 }, // miss: completes at pipe exit
        ];
        let out = run(&cfg, &trace).unwrap();
        let by_index = &out.results;
        assert_eq!(by_index[0].complete_cycle - by_index[0].accept_cycle, t0 + p - 1);
        assert_eq!(by_index[1].complete_cycle - by_index[1].accept_cycle, t0);
        assert_eq!(by_index[2].complete_cycle - by_index[2].accept_cycle, t0);
        assert_eq!(by_index[2].outcome, Outcome::NotFound);
    }

    #[test]
    fn single_replica_insert_completes_at_t0() {
        let cfg = config(1, 1);
        let out = run(&cfg, &[Operation::Insert { key: 9, value: 90 }]).unwrap();
        assert_eq!(
            out.results[0].complete_cycle - out.results[0].accept_cycle,
            cfg.t0()
        );
    }

    #[test]
    fn deterministic_across_runs() {
        let cfg = config(4, 2);
        let mut rng = crate::rng::SplitMix64::new(33);
        let trace: Vec<Operation> = (0..500)
            .map(|_| match rng.below(4) {
                0 => Operation::Search { key: rng.key_bits(32) },
                1 => Operation::Insert { key: rng.key_bits(32), value: rng.key_bits(32) },
                2 => Operation::Update { key: rng.key_bits(32), value: rng.key_bits(32) },
                _ => Operation::Delete { key: rng.key_bits(32) },
            })
            .collect();
        let a = run(&cfg, &trace).unwrap();
        let b = run(&cfg, &trace).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.report, b.report);
        assert_eq!(a.commits, b.commits);
    }

    #[test]
    fn measure_latency_numbers() {
        // 5-cycle search at 370.375 MHz is 13.5 ns; 20-cycle insert is 54 ns.
        let clock = 370.375;
        assert!((cycles_to_ns(5.0, clock) - 13.5).abs() < 0.01);
        assert!((cycles_to_ns(20.0, clock) - 54.0).abs() < 0.01);
        // The same points at the nominal 370 MHz: 13.51 / 54.05.
        assert!((cycles_to_ns(5.0, 370.0) - 13.51).abs() < 0.01);
        assert!((cycles_to_ns(20.0, 370.0) - 54.05).abs() < 0.01);
    }

    #[test]
    fn reject_mode_emits_capacity_violations() {
        let cfg = SimConfig {
            overflow_mode: OverflowMode::Reject,
            ..config(2, 1)
        };
        // Three NSQ in one batch of two: the third has no mutation PE.
        let trace = vec![
            Operation::Insert { key: 1, value: 0 },
            Operation::Insert { key: 2, value: 0 },
        ];
        let out = run(&cfg, &trace).unwrap();
        assert_eq!(out.results[1].outcome, Outcome::CapacityViolation);
        assert_eq!(out.report.outcomes.capacity_violation, 1);
    }
}
