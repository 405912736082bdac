//! Command-line front end for the hash-table simulator: single runs,
//! parameter sweeps, consistency verification, capacity planning, and trace
//! generation. Machine-readable outputs go to files under `--output`;
//! diagnostics go to stderr.

mod commands;
mod config;
mod report;
mod tracefile;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use xorht_core::engine::SimConfig;
use xorht_core::workload::WorkloadSpec;

#[derive(Parser)]
#[command(name = "xorht", version, about = "Parallel hash table simulator over XOR-banked storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation preset: xilinx16 or stratix8. File and flags override it.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides both the simulation seed and the workload seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long, default_value = "xorht-out")]
    output: PathBuf,
    /// Report format: csv, json-tree, or both.
    #[arg(long, default_value = "both")]
    format: String,
    /// Worker threads for sweeps and verification trials.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its report.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace file to replay (.gz accepted); generated from the workload
        /// config when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also dump one CSV row per query.
        #[arg(long)]
        dump_queries: bool,
    },
    /// Run a grid of simulations and merge one CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replay seeded trials against the sequential oracle and check the
    /// relaxed-consistency error bound.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of seeded trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Comma-separated error-count thresholds.
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<u64>>,
        /// Negative control: corrupt the Nth bank write and expect the
        /// checker to fail.
        #[arg(long, hide = true)]
        inject_fault: Option<u64>,
    },
    /// Capacity planning: bytes, SRAM blocks, utilization, max table sizes.
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        /// Device profile: u250, stratix10, or a JSON file path.
        #[arg(long)]
        device: Option<String>,
    },
    /// Generate a trace file from the workload config.
    GenTrace {
        /// Destination path (.gz compresses).
        path: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

pub(crate) struct Loaded {
    pub sim: SimConfig,
    pub workload: WorkloadSpec,
    pub file: config::FileConfig,
}

fn load(common: &CommonArgs) -> Result<Loaded> {
    let mut sim = match &common.preset {
        Some(name) => config::preset(name)?,
        None => SimConfig::default(),
    };
    let file = match &common.config {
        Some(path) => config::load_file(path)?,
        None => config::FileConfig::default(),
    };
    file.sim.apply(&mut sim)?;
    let mut workload = file.workload.to_spec();
    if let Some(seed) = common.seed {
        sim.seed = seed;
        workload.seed = seed;
    }
    sim.validate().map_err(|e| anyhow!("invalid config: {e}"))?;
    Ok(Loaded { sim, workload, file })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, trace, dump_queries } => {
            load(&common).and_then(|l| commands::simulate::run(&common, l, trace, dump_queries))
        }
        Command::Sweep { common } => load(&common).and_then(|l| commands::sweep::run(&common, l)),
        Command::Verify { common, trials, theta, inject_fault } => load(&common)
            .and_then(|l| commands::verify::run(&common, l, trials, theta, inject_fault)),
        Command::Plan { common, device } => {
            load(&common).and_then(|l| commands::plan::run(&common, l, device))
        }
        Command::GenTrace { path, common } => {
            load(&common).and_then(|l| commands::gen_trace::run(l, &path))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
