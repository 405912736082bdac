pub mod gen_trace;
pub mod plan;
pub mod simulate;
pub mod sweep;
pub mod verify;

use anyhow::{anyhow, Result};
use xorht_core::engine::{Operation, SimConfig};
use xorht_core::workload::{gen_conflict_free, gen_same_bucket, gen_uniform, WorkloadSpec};

use crate::config::Distribution;

/// Builds the query stream the workload section describes.
pub fn generate_ops(
    sim: &SimConfig,
    spec: &WorkloadSpec,
    dist: &Distribution,
) -> Result<Vec<Operation>> {
    let (p, k) = (sim.pe_count, sim.mutation_pes);
    let ops = match dist {
        Distribution::Uniform => gen_uniform(spec, p, k)?,
        Distribution::SameBucket { same_bucket } => {
            let matrix = sim.build_matrix().map_err(|e| anyhow!("{e}"))?;
            gen_same_bucket(spec, &matrix, *same_bucket, p, k)?
        }
        Distribution::ConflictFree => {
            let matrix = sim.build_matrix().map_err(|e| anyhow!("{e}"))?;
            gen_conflict_free(spec, &matrix, p, k, sim.window())?
        }
    };
    Ok(ops)
}
