//! Sequential-oracle replay and relaxed-consistency error accounting.
//!
//! The reference serialization is the simulator's own commit order: searches
//! at their read-stage cycle, mutations at their local-commit cycle, reads
//! before same-cycle commits, ties broken by PE index. A fully consistent
//! table replayed in that order gives the expected outcome of every query.
//!
//! Deviations are classified against the `p + t0` conflict window:
//!
//! * stale read — the outcome differs and a same-key mutation was in flight
//!   within the window before the query's read stage;
//! * write race — a mutation's committed effect differs from the oracle's
//!   (lost insert, duplicate slot, stale encode) because another mutation
//!   to the same bucket overlapped its window; detected by diffing the
//!   oracle bucket against a shadow table built from the actual committed
//!   words, and counted once at the event that opens the divergence;
//! * stale state — a later query answered from a bucket still carrying such
//!   a divergence; attributed to its origin, not counted again.
//!
//! Anything else is unexplained and means a simulator bug, as does any
//! difference between the final replicas and the shadow of the commit log.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{
    CommitRecord, OpKind, Operation, Outcome, QueryResult, RunOutput, SimConfig, SimError,
};
use crate::h3::H3Matrix;
use crate::pe::{resolve, ResolveOutcome};
use crate::workload::{gen_uniform, WorkloadError, WorkloadSpec};
use crate::xorstore::{DecodedSlot, Replica};

/// Plain bucket-array table with the same collision semantics as the PE
/// resolution unit (shared `resolve`: match first, then first open slot).
#[derive(Debug, Clone)]
pub struct OracleTable {
    matrix: H3Matrix,
    slots: usize,
    buckets: Vec<Vec<Option<(u128, u128)>>>,
}

impl OracleTable {
    pub fn new(matrix: H3Matrix, entries: usize, slots: usize) -> Self {
        Self { matrix, slots, buckets: alloc::vec![alloc::vec![None; slots]; entries] }
    }

    fn decoded_row(&self, entry: usize) -> Vec<DecodedSlot> {
        self.buckets[entry]
            .iter()
            .map(|slot| match slot {
                Some((key, value)) => DecodedSlot { occupied: true, key: *key, value: *value },
                None => DecodedSlot { occupied: false, key: 0, value: 0 },
            })
            .collect()
    }

    /// Applies one query in serialization order and reports its outcome.
    pub fn apply(&mut self, op: &Operation) -> Outcome {
        let entry = self.matrix.hash(op.key()) as usize;
        let row = self.decoded_row(entry);
        match (op, resolve(&row, op)) {
            (Operation::Search { .. }, ResolveOutcome::MatchSlot(s)) => {
                Outcome::Found(row[s].value)
            }
            (Operation::Search { .. }, _) => Outcome::NotFound,
            (Operation::Insert { key, value } | Operation::Update { key, value }, verdict) => {
                match verdict {
                    ResolveOutcome::MatchSlot(s) => {
                        self.buckets[entry][s] = Some((*key, *value));
                        Outcome::Updated
                    }
                    ResolveOutcome::OpenSlot(s) => {
                        self.buckets[entry][s] = Some((*key, *value));
                        Outcome::Inserted
                    }
                    ResolveOutcome::BucketFull => Outcome::InsertFailed,
                    ResolveOutcome::NotFound => unreachable!("upsert always gets a slot verdict"),
                }
            }
            (Operation::Delete { .. }, ResolveOutcome::MatchSlot(s)) => {
                self.buckets[entry][s] = None;
                Outcome::Deleted
            }
            (Operation::Delete { .. }, _) => Outcome::NotFound,
        }
    }

    fn bucket_pairs(&self, entry: usize) -> Vec<(u128, u128)> {
        let mut pairs: Vec<_> = self.buckets[entry].iter().flatten().copied().collect();
        pairs.sort_unstable();
        pairs
    }

    /// Final table contents as a sorted pair list.
    pub fn pairs(&self) -> Vec<(u128, u128)> {
        let mut pairs: Vec<_> =
            self.buckets.iter().flat_map(|b| b.iter().flatten().copied()).collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn slots(&self) -> usize {
        self.slots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Outcome differs; a same-key mutation was in flight within the window
    /// before this query's read stage.
    StaleRead,
    /// A mutation's effect diverged from the oracle under a same-bucket
    /// window overlap (the origin of a divergence).
    WriteRace,
    /// A write race that left the same key occupying two slots.
    DuplicateKey,
    /// Answered from a bucket whose divergence originated earlier; not
    /// counted in `n_err` again.
    StaleState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorRecord {
    pub trace_index: u64,
    pub kind: ErrorKind,
    /// The conflicting (or origin) mutation's trace index.
    pub conflicting: u64,
    /// Cycles between the conflicting mutation's acceptance and this
    /// query's read stage.
    pub cycle_gap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorReport {
    /// Queries incorrectly served by relaxed consistency: stale reads plus
    /// divergence origins (write races, duplicate keys).
    pub n_err: u64,
    /// Write races that duplicated a key across slots.
    pub duplicates: u64,
    /// Mismatches attributed to an earlier divergence; not in `n_err`.
    pub stale_cascades: u64,
    /// Mismatches with no window conflict and no divergence to blame.
    /// Must be zero.
    pub unexplained: u64,
    /// The conflict window `p + t0` in cycles.
    pub window: u64,
    pub records: Vec<ErrorRecord>,
    /// All replicas finished bank-identical and equal to the commit log's
    /// shadow. Must hold.
    pub state_audit_ok: bool,
}

impl ErrorReport {
    /// No unexplained mismatches and a clean state audit.
    pub fn clean(&self) -> bool {
        self.unexplained == 0 && self.state_audit_ok
    }
}

/// Everything one replay produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Expected outcome per trace index under the reference serialization.
    pub expected: Vec<Outcome>,
    pub report: ErrorReport,
    /// The oracle's final table contents.
    pub oracle_pairs: Vec<(u128, u128)>,
}

/// Expected outcomes a fully consistent table produces under the
/// simulator's serialization.
pub fn reference_replay(config: &SimConfig, ops: &[Operation], out: &RunOutput) -> Vec<Outcome> {
    analyze(config, ops, out).expected
}

/// Compares simulator outcomes against the oracle and classifies every
/// deviation.
pub fn classify(config: &SimConfig, ops: &[Operation], out: &RunOutput) -> ErrorReport {
    analyze(config, ops, out).report
}

pub fn analyze(config: &SimConfig, ops: &[Operation], out: &RunOutput) -> Analysis {
    let t0 = config.t0();
    let window = config.window();
    let read_off = config.read_offset();

    // Serialization: (cycle, reads-before-commits, pe, index).
    let mut events: Vec<(u64, u8, usize, u64)> = Vec::with_capacity(out.results.len());
    for r in &out.results {
        if r.outcome == Outcome::CapacityViolation {
            continue;
        }
        let (cycle, rank) = if r.kind == OpKind::Search {
            (r.accept_cycle + read_off, 0)
        } else {
            (r.accept_cycle + t0, 1)
        };
        events.push((cycle, rank, r.pe, r.trace_index));
    }
    events.sort_unstable();

    // Same-key and same-bucket mutation indexes for window probes.
    let mut nsq_by_key: BTreeMap<u128, Vec<(u64, u64)>> = BTreeMap::new();
    let mut nsq_by_bucket: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    for r in &out.results {
        if r.kind != OpKind::Search && r.outcome != Outcome::CapacityViolation {
            nsq_by_key.entry(r.key).or_default().push((r.accept_cycle, r.trace_index));
            let bucket = out.matrix.hash(r.key);
            nsq_by_bucket.entry(bucket).or_default().push((r.accept_cycle, r.trace_index));
        }
    }
    for list in nsq_by_key.values_mut().chain(nsq_by_bucket.values_mut()) {
        list.sort_unstable();
    }

    let mut commit_of: Vec<Option<&CommitRecord>> = alloc::vec![None; ops.len()];
    for c in &out.commits {
        commit_of[c.trace_index as usize] = Some(c);
    }
    let results_by_index: Vec<&QueryResult> = {
        let mut v: Vec<&QueryResult> = out.results.iter().collect();
        v.sort_unstable_by_key(|r| r.trace_index);
        v
    };

    let entries = config.entries as usize;
    let mut oracle = OracleTable::new(out.matrix.clone(), entries, config.slots);
    let mut shadow = Replica::new(config.mutation_pes, entries, config.slots, config.geometry());

    let shadow_bucket_pairs = |shadow: &Replica, entry: usize| -> Vec<(u128, u128)> {
        let mut pairs: Vec<(u128, u128)> = shadow
            .decode_row(entry)
            .into_iter()
            .filter(|d| d.occupied)
            .map(|d| (d.key, d.value))
            .collect();
        pairs.sort_unstable();
        pairs
    };

    // Open divergences: bucket -> origin trace index.
    let mut diverged: BTreeMap<usize, u64> = BTreeMap::new();

    let mut expected = alloc::vec![Outcome::CapacityViolation; ops.len()];
    let mut n_err = 0u64;
    let mut duplicates = 0u64;
    let mut stale_cascades = 0u64;
    let mut unexplained = 0u64;
    let mut records = Vec::new();

    for (_, _, _, idx) in events {
        let idx_us = idx as usize;
        let op = &ops[idx_us];
        let result = results_by_index[idx_us];
        let bucket = out.matrix.hash(op.key()) as usize;
        let read_cycle = result.accept_cycle + read_off;

        let exp = oracle.apply(op);
        expected[idx_us] = exp;

        let mut counted = false;
        if result.outcome != exp {
            // Same-key mutation in flight within the window before the read?
            let conflict = nsq_by_key.get(&op.key()).and_then(|list| {
                list.iter()
                    .filter(|(accept, j)| {
                        *j != idx && *accept <= read_cycle && read_cycle < accept + window
                    })
                    .max_by_key(|(accept, _)| *accept)
            });
            // A slot verdict can also be wrong because a different key's
            // mutation to the same bucket was mid-flight: fullness flicker
            // for mutations, and (with narrow keys) transient XOR garbage
            // that impersonates the searched key.
            let bucket_conflict = || {
                nsq_by_bucket.get(&(bucket as u64)).and_then(|list| {
                    list.iter()
                        .filter(|(accept, j)| {
                            *j != idx && *accept <= read_cycle && read_cycle < accept + window
                        })
                        .max_by_key(|(accept, _)| *accept)
                        .copied()
                })
            };
            if let Some(&(accept, j)) = conflict {
                n_err += 1;
                counted = true;
                records.push(ErrorRecord {
                    trace_index: idx,
                    kind: ErrorKind::StaleRead,
                    conflicting: j,
                    cycle_gap: read_cycle - accept,
                });
            } else if let Some(&origin) = diverged.get(&bucket) {
                stale_cascades += 1;
                let origin_accept = results_by_index[origin as usize].accept_cycle;
                records.push(ErrorRecord {
                    trace_index: idx,
                    kind: ErrorKind::StaleState,
                    conflicting: origin,
                    cycle_gap: read_cycle.saturating_sub(origin_accept),
                });
            } else if let Some((accept, j)) = bucket_conflict() {
                n_err += 1;
                counted = true;
                records.push(ErrorRecord {
                    trace_index: idx,
                    kind: ErrorKind::WriteRace,
                    conflicting: j,
                    cycle_gap: read_cycle - accept,
                });
            } else {
                unexplained += 1;
            }
        }

        if !op.is_nsq() {
            continue;
        }

        // Mirror what the simulator actually committed, then diff the bucket.
        if let Some(c) = commit_of[idx_us] {
            shadow
                .bank_mut(c.owner)
                .apply_write(c.entry, c.slot, c.word, c.emit_cycle)
                .expect("commit log preserves one write per bank per cycle");
        }
        let shadow_pairs = shadow_bucket_pairs(&shadow, bucket);
        let same = shadow_pairs == oracle.bucket_pairs(bucket);
        let duplicated = commit_of[idx_us].is_some()
            && shadow_pairs.windows(2).any(|w| w[0].0 == w[1].0)
            && shadow_pairs.iter().filter(|(k, _)| *k == op.key()).count() >= 2;

        if same {
            diverged.remove(&bucket);
        } else if !diverged.contains_key(&bucket) {
            diverged.insert(bucket, idx);
            // The origin must have a same-bucket mutation overlapping its
            // window; otherwise the divergence is a bug.
            let partner = nsq_by_bucket
                .get(&(bucket as u64))
                .and_then(|list| {
                    list.iter()
                        .filter(|(accept, j)| {
                            *j != idx && accept.abs_diff(result.accept_cycle) < window
                        })
                        .min_by_key(|(accept, _)| accept.abs_diff(result.accept_cycle))
                })
                .copied();
            match partner {
                Some((accept, j)) => {
                    let kind = if duplicated {
                        duplicates += 1;
                        ErrorKind::DuplicateKey
                    } else {
                        ErrorKind::WriteRace
                    };
                    if !counted {
                        n_err += 1;
                    }
                    records.push(ErrorRecord {
                        trace_index: idx,
                        kind,
                        conflicting: j,
                        cycle_gap: accept.abs_diff(result.accept_cycle),
                    });
                }
                None => unexplained += 1,
            }
        }
    }

    // Final-state audit: every replica identical, and equal to the shadow
    // of the commit log.
    let state_audit_ok = out
        .replicas
        .iter()
        .all(|r| r.same_cells(&out.replicas[0]))
        && out.replicas.first().is_none_or(|r| r.same_cells(&shadow));

    Analysis {
        expected,
        report: ErrorReport {
            n_err,
            duplicates,
            stale_cascades,
            unexplained,
            window,
            records,
            state_audit_ok,
        },
        oracle_pairs: oracle.pairs(),
    }
}

/// Per-trial consistency summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialReport {
    pub trial: u64,
    pub n_err: u64,
    pub duplicates: u64,
    pub unexplained: u64,
    pub stale_cascades: u64,
    pub clean: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialError {
    Sim(SimError),
    Workload(WorkloadError),
}

impl core::fmt::Display for TrialError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrialError::Sim(e) => write!(f, "{e}"),
            TrialError::Workload(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrialError {}

/// Runs one seeded uniform-workload trial and classifies it. Trial `i`
/// shifts the workload seed by `i`; the hash matrix stays fixed by the
/// simulation config.
pub fn run_one_trial(
    config: &SimConfig,
    spec: &WorkloadSpec,
    trial: u64,
) -> Result<TrialReport, TrialError> {
    let trial_spec = WorkloadSpec { seed: spec.seed.wrapping_add(trial), ..spec.clone() };
    let ops = gen_uniform(&trial_spec, config.pe_count, config.mutation_pes)
        .map_err(TrialError::Workload)?;
    let out = crate::engine::run(config, &ops).map_err(TrialError::Sim)?;
    let report = classify(config, &ops, &out);
    Ok(TrialReport {
        trial,
        n_err: report.n_err,
        duplicates: report.duplicates,
        unexplained: report.unexplained,
        stale_cascades: report.stale_cascades,
        clean: report.clean(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub theta: u64,
    /// Fraction of trials with `n_err >= theta`.
    pub empirical: f64,
    /// `min(1, (p^2 + p*t0) / theta)`.
    pub bound: f64,
    pub pass: bool,
}

/// The tail bound `(p^2 + p*t0) / theta` against empirical frequencies.
pub fn bound_table(p: usize, t0: u64, thetas: &[u64], n_errs: &[u64]) -> Vec<BoundRow> {
    let numerator = (p * p) as f64 + p as f64 * t0 as f64;
    thetas
        .iter()
        .map(|&theta| {
            let bound = if theta == 0 { 1.0 } else { (numerator / theta as f64).min(1.0) };
            let hits = n_errs.iter().filter(|&&n| n >= theta).count();
            let empirical =
                if n_errs.is_empty() { 0.0 } else { hits as f64 / n_errs.len() as f64 };
            BoundRow { theta, empirical, bound, pass: empirical <= bound }
        })
        .collect()
}

/// Runs `trials` seeded trials serially and tabulates the bound. The CLI
/// runs trials concurrently and feeds `bound_table` directly.
pub fn check_bound(
    config: &SimConfig,
    spec: &WorkloadSpec,
    trials: u64,
    thetas: &[u64],
) -> Result<Vec<BoundRow>, TrialError> {
    let mut n_errs = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        n_errs.push(run_one_trial(config, spec, trial)?.n_err);
    }
    Ok(bound_table(config.pe_count, config.t0(), thetas, &n_errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use alloc::vec;

    fn config(p: usize, k: usize) -> SimConfig {
        SimConfig { pe_count: p, mutation_pes: k, entries: 64, ..SimConfig::default() }
    }

    #[test]
    fn oracle_matches_resolution_semantics() {
        let matrix = H3Matrix::new(32, 4, 1).unwrap();
        let mut oracle = OracleTable::new(matrix, 16, 2);
        assert_eq!(oracle.apply(&Operation::Insert { key: 1, value: 10 }), Outcome::Inserted);
        assert_eq!(oracle.apply(&Operation::Update { key: 1, value: 11 }), Outcome::Updated);
        assert_eq!(oracle.apply(&Operation::Search { key: 1 }), Outcome::Found(11));
        assert_eq!(oracle.apply(&Operation::Delete { key: 1 }), Outcome::Deleted);
        assert_eq!(oracle.apply(&Operation::Delete { key: 1 }), Outcome::NotFound);
        assert_eq!(oracle.apply(&Operation::Search { key: 1 }), Outcome::NotFound);
    }

    #[test]
    fn conflict_free_two_phase_trace_has_no_errors() {
        let cfg = config(4, 2);
        let window = cfg.window() as usize;
        let mut trace = vec![Operation::Insert { key: 5, value: 50 }];
        trace.extend((0..2 * window).map(|i| Operation::Search { key: 1000 + i as u128 }));
        trace.push(Operation::Search { key: 5 });
        let out = run(&cfg, &trace).unwrap();
        let analysis = analyze(&cfg, &trace, &out);
        assert_eq!(analysis.report.n_err, 0);
        assert_eq!(analysis.report.unexplained, 0);
        assert!(analysis.report.state_audit_ok);
        let sim: Vec<Outcome> = {
            let mut v = out.results.clone();
            v.sort_unstable_by_key(|r| r.trace_index);
            v.into_iter().map(|r| r.outcome).collect()
        };
        assert_eq!(sim, analysis.expected);
        assert_eq!(analysis.oracle_pairs, out.replicas[0].occupied_pairs());
    }

    #[test]
    fn stale_read_two_query_trace() {
        // Insert on PE0 commits locally at t0=5 but reaches replica 3 only
        // at cycle 8; a search accepted at cycle 5 on PE3 reads at 6 and
        // misses it, while the oracle (commit at 5 < read at 6) finds it.
        let cfg = config(4, 1);
        let mut trace = vec![Operation::Insert { key: 7, value: 70 }];
        trace.extend((1..23).map(|i| Operation::Search { key: 1000 + i as u128 }));
        trace.push(Operation::Search { key: 7 }); // position 23: cycle 5, PE3
        let out = run(&cfg, &trace).unwrap();
        let search = out.results.iter().find(|r| r.trace_index == 23).unwrap();
        assert_eq!(search.pe, 3);
        assert_eq!(search.accept_cycle, 5);
        assert_eq!(search.outcome, Outcome::NotFound);

        let analysis = analyze(&cfg, &trace, &out);
        assert_eq!(analysis.expected[23], Outcome::Found(70));
        assert_eq!(analysis.report.n_err, 1);
        assert_eq!(analysis.report.unexplained, 0);
        let rec = &analysis.report.records[0];
        assert_eq!(rec.kind, ErrorKind::StaleRead);
        assert_eq!(rec.trace_index, 23);
        assert_eq!(rec.conflicting, 0);
        assert!(rec.cycle_gap < cfg.window());
    }

    #[test]
    fn racing_inserts_classified_as_write_race() {
        // Two same-cycle inserts of distinct keys into one bucket pick the
        // same slot and annihilate; later searches miss both but are all
        // attributed to the race, never unexplained.
        let cfg = config(2, 2);
        let matrix = cfg.build_matrix().unwrap();
        let keys = crate::workload::same_bucket_keys(&matrix, 3, 2).unwrap();
        let mut trace = vec![
            Operation::Insert { key: keys[0], value: 1 },
            Operation::Insert { key: keys[1], value: 2 },
        ];
        trace.extend((0..40).map(|i| Operation::Search { key: 0x4000 + i as u128 }));
        trace.push(Operation::Search { key: keys[0] });
        trace.push(Operation::Search { key: keys[1] });
        let out = run(&cfg, &trace).unwrap();
        let analysis = analyze(&cfg, &trace, &out);
        assert_eq!(analysis.report.unexplained, 0);
        assert!(analysis.report.state_audit_ok);
        assert!(analysis.report.n_err >= 1);
        assert!(analysis
            .report
            .records
            .iter()
            .any(|r| r.kind == ErrorKind::WriteRace));
        // The trailing searches ran long after the race: stale state.
        assert!(analysis.report.stale_cascades >= 2);
    }

    #[test]
    fn single_pe_conflict_free_equivalence() {
        let cfg = config(1, 1);
        let matrix = cfg.build_matrix().unwrap();
        let spec = WorkloadSpec { total: 2000, nsq_fraction: 0.6, ..WorkloadSpec::default() };
        let ops =
            crate::workload::gen_conflict_free(&spec, &matrix, 1, 1, cfg.window()).unwrap();
        let out = run(&cfg, &ops).unwrap();
        let analysis = analyze(&cfg, &ops, &out);
        assert_eq!(analysis.report.n_err, 0);
        assert_eq!(analysis.report.stale_cascades, 0);
        assert_eq!(analysis.report.unexplained, 0);
        for r in &out.results {
            assert_eq!(r.outcome, analysis.expected[r.trace_index as usize]);
        }
        assert_eq!(analysis.oracle_pairs, out.replicas[0].occupied_pairs());
    }

    #[test]
    fn fault_injection_fails_the_audit() {
        let cfg = config(4, 2);
        let trace: Vec<Operation> =
            (0..50).map(|i| Operation::Insert { key: i as u128, value: i as u128 }).collect();
        let out =
            crate::engine::run_with_fault(&cfg, &trace, Some(crate::fabric::FaultSpec { write_index: 9 }))
                .unwrap();
        let report = classify(&cfg, &trace, &out);
        assert!(!report.clean());
    }

    #[test]
    fn bound_table_arithmetic() {
        // p=16, t0=5: numerator 336.
        let rows = bound_table(16, 5, &[336, 672, 1344], &[0, 10, 700, 700]);
        assert_eq!(rows[0].bound, 1.0);
        assert_eq!(rows[1].bound, 0.5);
        assert_eq!(rows[1].empirical, 0.5);
        assert!(rows[1].pass);
        assert_eq!(rows[2].bound, 0.25);
        assert_eq!(rows[2].empirical, 0.0);
        assert!(rows[2].pass);
    }

    #[test]
    fn p1_trials_have_zero_errors_on_conflict_free_workloads() {
        // Single pipeline, conflict-free trace: nothing to classify.
        let cfg = config(1, 1);
        let matrix = cfg.build_matrix().unwrap();
        for seed in 0..5 {
            let spec = WorkloadSpec { total: 500, seed, ..WorkloadSpec::default() };
            let ops =
                crate::workload::gen_conflict_free(&spec, &matrix, 1, 1, cfg.window()).unwrap();
            let out = run(&cfg, &ops).unwrap();
            let report = classify(&cfg, &ops, &out);
            assert_eq!(report.n_err, 0);
            assert!(report.clean());
        }
    }
}
