//! Experiment configuration: a JSON file with optional `sim`, `workload`,
//! `sweep`, `verify`, and `plan` sections. Presets seed the simulation
//! section, file values override presets, command-line flags override both.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use xorht_core::engine::SimConfig;
use xorht_core::fabric::OverflowMode;
use xorht_core::pe::StageLatencies;
use xorht_core::resource::DeviceProfile;
use xorht_core::workload::{OpMix, WorkloadSpec};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    pub sweep: Option<SweepSection>,
    pub verify: Option<VerifySection>,
    pub plan: Option<PlanSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub pe_count: Option<usize>,
    pub mutation_pes: Option<usize>,
    pub entries: Option<u64>,
    pub slots: Option<usize>,
    pub key_bits: Option<u32>,
    pub value_bits: Option<u32>,
    pub clock_mhz: Option<f64>,
    pub seed: Option<u64>,
    pub stage_latencies: Option<StageSection>,
    pub overflow_mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub hash: u32,
    pub read: u32,
    pub xor_tree: u32,
    pub resolve: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub total: Option<u64>,
    pub nsq_fraction: Option<f64>,
    pub op_mix: Option<OpMixSection>,
    pub key_space_bits: Option<u32>,
    pub hit_probability: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub distribution: Distribution,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpMixSection {
    pub insert: f64,
    pub update: f64,
    pub delete: f64,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
    ConflictFree,
    #[serde(untagged)]
    SameBucket {
        same_bucket: u64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub pe_counts: Vec<usize>,
    pub mutation_pes: Vec<usize>,
    #[serde(default)]
    pub entries: Vec<u64>,
    #[serde(default)]
    pub slots: Vec<usize>,
    #[serde(default)]
    pub widths: Vec<(u32, u32)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub trials: Option<u64>,
    pub thetas: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub device: Option<DeviceSection>,
    pub pe_counts: Vec<u64>,
    pub mutation_pes: Vec<u64>,
    pub entries: Vec<u64>,
    pub slots: Vec<u64>,
    pub widths: Vec<(u64, u64)>,
    pub budget_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DeviceSection {
    Named(String),
    Inline { name: String, total_blocks: u64, block_depth: u64, block_width: u64 },
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))
}

/// Paper-scale starting points: a 16-PE Xilinx-like table at 370.375 MHz
/// and an 8-PE Stratix-like one at 276 MHz.
pub fn preset(name: &str) -> Result<SimConfig> {
    let base = SimConfig::default();
    match name {
        "xilinx16" => Ok(SimConfig {
            pe_count: 16,
            mutation_pes: 16,
            entries: 4096,
            slots: 4,
            clock_mhz: 370.375,
            ..base
        }),
        "stratix8" => Ok(SimConfig {
            pe_count: 8,
            mutation_pes: 4,
            entries: 16384,
            slots: 4,
            clock_mhz: 276.0,
            ..base
        }),
        other => bail!("unknown preset '{other}' (available: xilinx16, stratix8)"),
    }
}

impl SimSection {
    pub fn apply(&self, cfg: &mut SimConfig) -> Result<()> {
        if let Some(v) = self.pe_count {
            cfg.pe_count = v;
        }
        if let Some(v) = self.mutation_pes {
            cfg.mutation_pes = v;
        }
        if let Some(v) = self.entries {
            cfg.entries = v;
        }
        if let Some(v) = self.slots {
            cfg.slots = v;
        }
        if let Some(v) = self.key_bits {
            cfg.key_bits = v;
        }
        if let Some(v) = self.value_bits {
            cfg.value_bits = v;
        }
        if let Some(v) = self.clock_mhz {
            cfg.clock_mhz = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(s) = &self.stage_latencies {
            cfg.stages = StageLatencies {
                hash: s.hash,
                read: s.read,
                xor_tree: s.xor_tree,
                resolve: s.resolve,
            };
        }
        if let Some(mode) = &self.overflow_mode {
            cfg.overflow_mode = match mode.as_str() {
                "defer" => OverflowMode::Defer,
                "reject" => OverflowMode::Reject,
                other => bail!("overflow_mode: expected 'defer' or 'reject', got '{other}'"),
            };
        }
        Ok(())
    }
}

impl WorkloadSection {
    pub fn to_spec(&self) -> WorkloadSpec {
        let base = WorkloadSpec::default();
        WorkloadSpec {
            total: self.total.unwrap_or(base.total),
            nsq_fraction: self.nsq_fraction.unwrap_or(base.nsq_fraction),
            mix: self
                .op_mix
                .as_ref()
                .map(|m| OpMix { insert: m.insert, update: m.update, delete: m.delete })
                .unwrap_or(base.mix),
            key_space_bits: self.key_space_bits.unwrap_or(base.key_space_bits),
            hit_probability: self.hit_probability.unwrap_or(base.hit_probability),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

impl DeviceSection {
    pub fn resolve(&self) -> Result<DeviceProfile> {
        match self {
            DeviceSection::Named(name) => named_device(name),
            DeviceSection::Inline { name, total_blocks, block_depth, block_width } => {
                Ok(DeviceProfile {
                    name: name.clone(),
                    total_blocks: *total_blocks,
                    block_depth: *block_depth,
                    block_width: *block_width,
                })
            }
        }
    }
}

/// A built-in name, or a path to a JSON profile with the same fields.
pub fn named_device(name: &str) -> Result<DeviceProfile> {
    match name {
        "u250" => Ok(DeviceProfile::u250()),
        "stratix10" => Ok(DeviceProfile::stratix10()),
        path if Path::new(path).exists() => {
            #[derive(Deserialize)]
            struct Raw {
                name: String,
                total_blocks: u64,
                block_depth: u64,
                block_width: u64,
            }
            let text = fs::read_to_string(path)?;
            let raw: Raw = serde_json::from_str(&text)
                .with_context(|| format!("cannot parse device profile {path}"))?;
            Ok(DeviceProfile {
                name: raw.name,
                total_blocks: raw.total_blocks,
                block_depth: raw.block_depth,
                block_width: raw.block_width,
            })
        }
        other => bail!("unknown device '{other}' (built-ins: u250, stratix10; or a JSON file path)"),
    }
}
