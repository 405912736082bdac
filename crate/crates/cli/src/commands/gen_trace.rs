use std::path::Path;

use anyhow::Result;
use xorht_core::workload::trace::TraceData;

use crate::tracefile;
use crate::Loaded;

pub fn run(loaded: Loaded, path: &Path) -> Result<bool> {
    let Loaded { sim, workload, file } = loaded;
    let ops = crate::commands::generate_ops(&sim, &workload, &file.workload.distribution)?;
    let data = TraceData { key_bits: sim.key_bits, value_bits: sim.value_bits, ops };
    tracefile::write_trace(path, &data)?;
    println!("wrote {} queries to {}", data.ops.len(), path.display());
    Ok(true)
}
