//! Report emission: a JSON key/value tree and flat CSVs with stable headers.
//! Machine-readable files never mix with log text; logs go to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use xorht_core::engine::{cycles_to_ns, QueryResult, SimConfig, SimReport};
use xorht_core::consistency::{BoundRow, TrialReport};
use xorht_core::resource::PlanRow;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn latency_value(report: &SimReport) -> Value {
    let mut per_op = Map::new();
    for (kind, summary) in &report.latency.per_op {
        per_op.insert(
            kind.label().to_string(),
            json!({
                "count": summary.count,
                "min_cycles": summary.min_cycles,
                "max_cycles": summary.max_cycles,
                "mean_cycles": summary.mean_cycles,
                "mean_ns": summary.mean_ns(report.clock_mhz),
            }),
        );
    }
    let s = &report.latency.search;
    let n = &report.latency.committed_nsq;
    json!({
        "per_op": Value::Object(per_op),
        "search": {
            "count": s.count,
            "mean_cycles": s.mean_cycles,
            "mean_ns": s.mean_ns(report.clock_mhz),
        },
        "committed_nsq": {
            "count": n.count,
            "mean_cycles": n.mean_cycles,
            "mean_ns": n.mean_ns(report.clock_mhz),
        },
    })
}

/// The full report as a JSON tree.
pub fn report_json(config: &SimConfig, report: &SimReport) -> Value {
    let histograms: Map<String, Value> = report
        .histograms
        .iter()
        .map(|(kind, h)| {
            let cells: Map<String, Value> =
                h.iter().map(|(cycles, count)| (cycles.to_string(), json!(count))).collect();
            (kind.label().to_string(), Value::Object(cells))
        })
        .collect();
    json!({
        "config": {
            "pe_count": config.pe_count,
            "mutation_pes": config.mutation_pes,
            "nsq_ratio": config.mutation_pes as f64 / config.pe_count as f64,
            "entries": config.entries,
            "slots": config.slots,
            "key_bits": config.key_bits,
            "value_bits": config.value_bits,
            "t0": config.t0(),
            "clock_mhz": config.clock_mhz,
            "seed": config.seed,
        },
        "totals": {
            "total_cycles": report.total_cycles,
            "steady_cycles": report.steady_cycles,
            "accepted_queries": report.accepted_queries,
            "completed_queries": report.completed_queries,
            "deferred_cycles": report.deferred_cycles,
            "deferred_queries": report.deferred_queries,
            "discipline_violations": report.discipline_violations,
        },
        "throughput": {
            "raw_mops": report.raw_mops,
            "steady_mops": report.steady_mops,
        },
        "outcomes": {
            "found": report.outcomes.found,
            "none": report.outcomes.not_found,
            "inserted": report.outcomes.inserted,
            "updated": report.outcomes.updated,
            "deleted": report.outcomes.deleted,
            "insert_failed": report.outcomes.insert_failed,
            "capacity_violation": report.outcomes.capacity_violation,
        },
        "latency": latency_value(report),
        "histograms": Value::Object(histograms),
    })
}

/// Flat CSV: one row per op-class and metric, plus run-level totals.
pub fn report_csv(report: &SimReport) -> String {
    let mut out = String::from("op,metric,value\n");
    let mut row = |op: &str, metric: &str, value: String| {
        let _ = writeln!(out, "{op},{metric},{value}");
    };
    row("total", "total_cycles", report.total_cycles.to_string());
    row("total", "steady_cycles", report.steady_cycles.to_string());
    row("total", "completed_queries", report.completed_queries.to_string());
    row("total", "deferred_cycles", report.deferred_cycles.to_string());
    row("total", "deferred_queries", report.deferred_queries.to_string());
    row("total", "discipline_violations", report.discipline_violations.to_string());
    row("total", "raw_mops", format!("{:.4}", report.raw_mops));
    row("total", "steady_mops", format!("{:.4}", report.steady_mops));
    for (kind, s) in &report.latency.per_op {
        let op = kind.label();
        row(op, "count", s.count.to_string());
        row(op, "min_cycles", s.min_cycles.to_string());
        row(op, "max_cycles", s.max_cycles.to_string());
        row(op, "mean_cycles", format!("{:.4}", s.mean_cycles));
        row(op, "mean_ns", format!("{:.4}", s.mean_ns(report.clock_mhz)));
    }
    let nsq = &report.latency.committed_nsq;
    row("committed_nsq", "count", nsq.count.to_string());
    row("committed_nsq", "mean_cycles", format!("{:.4}", nsq.mean_cycles));
    row("committed_nsq", "mean_ns", format!("{:.4}", nsq.mean_ns(report.clock_mhz)));
    out
}

/// Per-query CSV dump.
pub fn queries_csv(results: &[QueryResult], key_bits: u32) -> String {
    let digits = ((key_bits + 3) / 4) as usize;
    let mut out = String::from("trace_index,op,key,outcome,issue,accept,complete\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{:0digits$x},{},{},{},{}",
            r.trace_index,
            r.kind.label(),
            r.key,
            r.outcome.label(),
            r.issue_cycle,
            r.accept_cycle,
            r.complete_cycle,
        );
    }
    out
}

/// One sweep grid point, flattened for the merged CSV.
pub struct SweepRow {
    pub config: SimConfig,
    pub report: Option<SimReport>,
    pub error: Option<String>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "p,k,nsq_ratio,entries,slots,key_bits,value_bits,clock_mhz,queries,total_cycles,steady_cycles,raw_mops,steady_mops,search_mean_ns,committed_nsq_mean_ns,deferred_cycles,status\n",
    );
    for row in rows {
        let c = &row.config;
        let ratio = c.mutation_pes as f64 / c.pe_count as f64;
        match (&row.report, &row.error) {
            (Some(r), _) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.4},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},ok",
                    c.pe_count,
                    c.mutation_pes,
                    ratio,
                    c.entries,
                    c.slots,
                    c.key_bits,
                    c.value_bits,
                    c.clock_mhz,
                    r.completed_queries,
                    r.total_cycles,
                    r.steady_cycles,
                    r.raw_mops,
                    r.steady_mops,
                    r.latency.search.mean_ns(c.clock_mhz),
                    r.latency.committed_nsq.mean_ns(c.clock_mhz),
                    r.deferred_cycles,
                );
            }
            (None, Some(err)) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.4},{},{},{},{},{},,,,,,,,,error: {}",
                    c.pe_count,
                    c.mutation_pes,
                    ratio,
                    c.entries,
                    c.slots,
                    c.key_bits,
                    c.value_bits,
                    c.clock_mhz,
                    err.replace(',', ";"),
                );
            }
            (None, None) => unreachable!("row has either a report or an error"),
        }
    }
    out
}

pub fn trials_csv(trials: &[TrialReport]) -> String {
    let mut out = String::from("trial,n_err,duplicates,unexplained\n");
    for t in trials {
        let _ = writeln!(out, "{},{},{},{}", t.trial, t.n_err, t.duplicates, t.unexplained);
    }
    out
}

pub fn bound_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("theta,empirical,bound,pass\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", r.theta, r.empirical, r.bound, r.pass);
    }
    out
}

pub fn plan_csv(rows: &[PlanRow]) -> String {
    let mut out = String::from(
        "p,k,entries,slots,key_bits,value_bits,word_bits,bytes,blocks,utilization,fits,max_entries_in_budget\n",
    );
    for r in rows {
        let word = r.key_bits + r.value_bits + 1;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.1},{},{:.4},{},{}",
            r.pe_count,
            r.mutation_pes,
            r.entries,
            r.slots,
            r.key_bits,
            r.value_bits,
            word,
            r.bytes,
            r.blocks,
            r.utilization,
            r.fits,
            r.max_entries_in_budget,
        );
    }
    out
}

/// Human summary for stdout.
pub fn summarize(report: &SimReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} PEs ({} mutation-capable), t0={} cycles, clock {} MHz",
        report.pe_count, report.mutation_pes, report.t0, report.clock_mhz
    );
    let _ = writeln!(
        s,
        "{} queries in {} cycles ({} steady): {:.1} MOPS steady ({:.1} raw)",
        report.completed_queries,
        report.total_cycles,
        report.steady_cycles,
        report.steady_mops,
        report.raw_mops
    );
    let _ = writeln!(
        s,
        "search {:.2} ns mean, committed NSQ {:.2} ns mean; {} deferred cycles",
        cycles_to_ns(report.latency.search.mean_cycles, report.clock_mhz),
        cycles_to_ns(report.latency.committed_nsq.mean_cycles, report.clock_mhz),
        report.deferred_cycles
    );
    s
}
