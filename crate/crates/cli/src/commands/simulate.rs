use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};

use crate::report;
use crate::tracefile;
use crate::{CommonArgs, Loaded};

pub fn run(
    common: &CommonArgs,
    loaded: Loaded,
    trace_path: Option<PathBuf>,
    dump_queries: bool,
) -> Result<bool> {
    let Loaded { sim, workload, file } = loaded;

    let ops = match trace_path {
        Some(path) => {
            let data = tracefile::read_trace(&path)?;
            eprintln!(
                "replaying {} queries from {} ({}-bit keys)",
                data.ops.len(),
                path.display(),
                data.key_bits
            );
            data.ops
        }
        None => {
            let dist = file.workload.distribution.clone();
            crate::commands::generate_ops(&sim, &workload, &dist)?
        }
    };

    let out = xorht_core::engine::run(&sim, &ops).map_err(|e| anyhow!("{e}"))?;

    fs::create_dir_all(&common.output)
        .with_context(|| format!("cannot create {}", common.output.display()))?;
    if common.format == "json-tree" || common.format == "both" {
        let tree = report::report_json(&sim, &out.report);
        report::write_text(
            &common.output.join("report.json"),
            &serde_json::to_string_pretty(&tree)?,
        )?;
    }
    if common.format == "csv" || common.format == "both" {
        report::write_text(&common.output.join("report.csv"), &report::report_csv(&out.report))?;
    }
    if dump_queries {
        report::write_text(
            &common.output.join("queries.csv"),
            &report::queries_csv(&out.results, sim.key_bits),
        )?;
    }

    print!("{}", report::summarize(&out.report));
    Ok(true)
}
