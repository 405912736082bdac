use std::fs;

use anyhow::{Context, Result};
use xorht_core::resource::plan_sweep;

use crate::config::{named_device, PlanSection};
use crate::report;
use crate::{CommonArgs, Loaded};

pub fn run(common: &CommonArgs, loaded: Loaded, device_flag: Option<String>) -> Result<bool> {
    let Loaded { sim, file, .. } = loaded;

    // The Fig.-4-style default grid: 50K x 2 x (4B+4B) over all PE shapes.
    let defaults = PlanSection {
        device: None,
        pe_counts: vec![2, 4, 8, 16],
        mutation_pes: (1..=16).collect(),
        entries: vec![50_000],
        slots: vec![2],
        widths: vec![(32, 32)],
        budget_fraction: None,
    };
    let section = file.plan.as_ref().unwrap_or(&defaults);

    let device = match &device_flag {
        Some(name) => named_device(name)?,
        None => match &section.device {
            Some(d) => d.resolve()?,
            None => xorht_core::resource::DeviceProfile::u250(),
        },
    };
    let budget = section.budget_fraction.unwrap_or(0.8);

    let entries = if section.entries.is_empty() { vec![sim.entries] } else { section.entries.clone() };
    let rows = plan_sweep(
        &device,
        &section.pe_counts,
        &section.mutation_pes,
        &entries,
        &section.slots,
        &section.widths,
        budget,
    );

    fs::create_dir_all(&common.output)
        .with_context(|| format!("cannot create {}", common.output.display()))?;
    report::write_text(&common.output.join("plan.csv"), &report::plan_csv(&rows))?;

    let infeasible = rows.iter().filter(|r| !r.fits).count();
    println!(
        "plan: {} rows on {} ({} blocks of {}x{}), {} infeasible; wrote {}",
        rows.len(),
        device.name,
        device.total_blocks,
        device.block_depth,
        device.block_width,
        infeasible,
        common.output.join("plan.csv").display()
    );
    Ok(true)
}
