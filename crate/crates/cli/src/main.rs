use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use crom_cli::rve::{generate_rve, write_rve, GeneratorSpec};
use crom_cli::run::{cit_bench_row, CIT_BENCH_COLUMNS};
use crom_core::spectral::VoxelGrid;
use crom_core::PhaseId;

/// Worker thread count of the parallel kernels.
const THREADS_ENV: &str = "CROM_THREADS";

#[derive(Parser)]
#[command(name = "crom", version, about = "Clustering-based reduced-order micromechanics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run configuration.
    Run {
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: configured `output`, else `crom_out`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare run directories against the last one.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the long-format CSV here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the voxel grid described by a generator TOML file.
    GenRve {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time the incremental interaction tensor update against full reassembly.
    CitBench {
        #[arg(long)]
        n_init: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, num_args = 2, default_values_t = [64, 64])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::Run { config, seed, output } => {
            let mut cfg = crom_cli::parse_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("crom_out"));
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let summary = crom_cli::run(&cfg, &base, &out).with_context(|| format!("run failed; see {}", out.display()))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Compare { dirs, output } => {
            let report = crom_cli::compare(&dirs)?;
            print!("{}", report.to_text());
            if let Some(path) = output {
                std::fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::GenRve { spec, output } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: GeneratorSpec = toml::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let rve = generate_rve(&spec)?;
            write_rve(&output, &rve.grid)?;
            println!("{} particles, volume fraction {:.4}", rve.n_particles, rve.volume_fraction);
        }
        Command::CitBench { n_init, alpha, beta, dims, seed } => {
            if dims.len() != 2 {
                bail!("--dims takes two values");
            }
            let grid = VoxelGrid::uniform(dims, vec![1.0, 1.0], PhaseId(0))?;
            let report = crom_core::cit::benchmark_cit_update(&grid, n_init, alpha, beta, seed)?;
            println!("{CIT_BENCH_COLUMNS}\n{}", cit_bench_row(&report));
        }
    }
    Ok(())
}
