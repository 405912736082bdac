use std::fs;

use anyhow::{Context, Result};
use rayon::prelude::*;
use xorht_core::engine::SimConfig;
use xorht_core::workload::WorkloadSpec;

use crate::config::SweepSection;
use crate::report::{self, SweepRow};
use crate::{thread_pool, CommonArgs, Loaded};

/// Grid points from the sweep section, falling back to the base config for
/// unswept axes.
fn build_grid(base: &SimConfig, sweep: Option<&SweepSection>) -> Vec<SimConfig> {
    let defaults = SweepSection {
        pe_counts: vec![2, 4, 8, 16],
        mutation_pes: vec![1, 2, 4, 8, 16],
        entries: vec![],
        slots: vec![],
        widths: vec![],
    };
    let sweep = sweep.unwrap_or(&defaults);
    let entries = if sweep.entries.is_empty() { vec![base.entries] } else { sweep.entries.clone() };
    let slots = if sweep.slots.is_empty() { vec![base.slots] } else { sweep.slots.clone() };
    let widths = if sweep.widths.is_empty() {
        vec![(base.key_bits, base.value_bits)]
    } else {
        sweep.widths.clone()
    };

    let mut grid = Vec::new();
    for &p in &sweep.pe_counts {
        for &k in &sweep.mutation_pes {
            if k > p {
                continue;
            }
            for &e in &entries {
                for &s in &slots {
                    for &(kb, vb) in &widths {
                        grid.push(SimConfig {
                            pe_count: p,
                            mutation_pes: k,
                            entries: e,
                            slots: s,
                            key_bits: kb,
                            value_bits: vb,
                            ..*base
                        });
                    }
                }
            }
        }
    }
    grid
}

fn run_point(cfg: &SimConfig, workload: &WorkloadSpec, dist: &crate::config::Distribution) -> SweepRow {
    let attempt = || -> Result<xorht_core::engine::SimReport> {
        cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        // The NSQ share cannot exceed this point's contract; cap it so one
        // sweep covers mixed ratios.
        let spec = WorkloadSpec {
            nsq_fraction: workload
                .nsq_fraction
                .min(cfg.mutation_pes as f64 / cfg.pe_count as f64),
            ..workload.clone()
        };
        let ops = crate::commands::generate_ops(cfg, &spec, dist)?;
        let out = xorht_core::engine::run(cfg, &ops).map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(out.report)
    };
    match attempt() {
        Ok(report) => SweepRow { config: *cfg, report: Some(report), error: None },
        Err(e) => SweepRow { config: *cfg, report: None, error: Some(format!("{e:#}")) },
    }
}

pub fn run(common: &CommonArgs, loaded: Loaded) -> Result<bool> {
    let Loaded { sim, workload, file } = loaded;
    let grid = build_grid(&sim, file.sweep.as_ref());
    eprintln!("sweep: {} grid points", grid.len());

    let dist = file.workload.distribution.clone();
    let pool = thread_pool(common.jobs)?;
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                // Stable per-point workload seed.
                let spec = WorkloadSpec {
                    seed: workload.seed.wrapping_add(i as u64),
                    ..workload.clone()
                };
                run_point(cfg, &spec, &dist)
            })
            .collect()
    });

    fs::create_dir_all(&common.output)
        .with_context(|| format!("cannot create {}", common.output.display()))?;
    report::write_text(&common.output.join("sweep.csv"), &report::sweep_csv(&rows))?;

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep: {} points, {} failed; wrote {}",
        rows.len(),
        failures,
        common.output.join("sweep.csv").display()
    );
    Ok(failures == 0)
}
