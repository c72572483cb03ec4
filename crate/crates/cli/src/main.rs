use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use discobench_core::campaign::{
    compute_metrics, default_pool, emit_plot_data, plan_cells, run_campaign, sample_systems, CampaignConfig,
    CampaignError,
};
use discobench_core::chem::Element;

/// Closed-loop materials discovery benchmark runner.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a campaign config and write the run directory.
    Run {
        config: PathBuf,
        /// worker threads (overrides the config and DISCOBENCH_WORKERS)
        #[arg(long)]
        workers: Option<usize>,
        /// run directory (overrides the config)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute metrics.csv, af_series.csv and aggregate.csv from a run directory.
    Metrics { run_dir: PathBuf },
    /// Recompute curves.csv and phase-diagram exports from a run directory.
    PlotData { run_dir: PathBuf },
    /// Parse and validate a campaign config without running it.
    Validate { config: PathBuf },
    /// Print randomly sampled chemical systems as config-ready YAML.
    SampleSystems {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        max_atoms: u32,
        /// comma-separated element symbols; defaults to the built-in intermetallic pool
        #[arg(long, value_delimiter = ',')]
        pool: Option<Vec<String>>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_IO: u8 = 3;

fn fail(e: &CampaignError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        CampaignError::Config(_) => ExitCode::from(EXIT_CONFIG),
        CampaignError::Io { .. } | CampaignError::Artifact { .. } => ExitCode::from(EXIT_IO),
    }
}

fn run(config: PathBuf, workers: Option<usize>, output: Option<PathBuf>) -> ExitCode {
    let mut cfg = match CampaignConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(o) = output {
        cfg.output = o;
    }
    let workers = workers.unwrap_or_else(|| cfg.worker_count());
    match run_campaign(&cfg, workers) {
        Ok(manifest) => {
            let failed = manifest.failed_cells();
            println!(
                "{} cells, {} failed; results in {}",
                manifest.cells.len(),
                failed,
                cfg.output.display()
            );
            if failed > 0 {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(&e),
    }
}

fn validate(config: PathBuf) -> ExitCode {
    let cfg = match CampaignConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match (cfg.systems(), plan_cells(&cfg)) {
        (Ok(systems), Ok(cells)) => {
            println!(
                "ok: {} systems, {} policies, {} epsilons, {} cells",
                systems.len(),
                cfg.policies.len(),
                cfg.epsilons.len(),
                cells.len()
            );
            ExitCode::SUCCESS
        }
        (Err(e), _) | (_, Err(e)) => fail(&e),
    }
}

fn sample(size: usize, count: usize, seed: u64, max_atoms: u32, pool: Option<Vec<String>>) -> ExitCode {
    let pool = match pool {
        Some(symbols) => match symbols.iter().map(|s| Element::from_symbol(s.trim())).collect() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => default_pool(),
    };
    match sample_systems(&pool, size, count, seed, max_atoms) {
        Ok(systems) => {
            println!("systems:");
            for s in systems {
                let symbols: Vec<&str> = s.elements().iter().map(|e| e.symbol()).collect();
                println!("  - {{elements: [{}], max_atoms: {}}}", symbols.join(", "), s.max_atoms());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            workers,
            output,
        } => run(config, workers, output),
        Command::Metrics { run_dir } => match compute_metrics(&run_dir) {
            Ok(()) => {
                println!("wrote metrics to {}", run_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::PlotData { run_dir } => match emit_plot_data(&run_dir) {
            Ok(()) => {
                println!("wrote plot data to {}", run_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Validate { config } => validate(config),
        Command::SampleSystems {
            size,
            count,
            seed,
            max_atoms,
            pool,
        } => sample(size, count, seed, max_atoms, pool),
    }
}
