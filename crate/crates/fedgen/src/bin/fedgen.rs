//! Experiment CLI.
//!
//! `run` executes one config over its seed grid, `matrix` a cross-product of
//! {protocol x beta x prompt_kind x seeds}, `mia` a membership-inference
//! evaluation, and `retrieve` a replication-retrieval scan. Outputs are CSVs
//! under the output directory (--out, then the config's output_dir, then
//! $FEDGEN_OUT, then ./out). Exit codes: 0 success, 1 config error,
//! 2 runtime failure.

use clap::{Parser, Subcommand};
use fedgen::error::Error;
use fedgen::experiment::{self, ExperimentConfig, MatrixConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fedgen", about = "Prompt-transmitting federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (falls back to the config's output_dir, $FEDGEN_OUT, ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config's seed list, e.g. --seeds 0,1,2.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Worker threads for matrix cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config over its seed grid.
    Run { config: PathBuf },
    /// Run a {protocol x beta x prompt_kind x seeds} matrix.
    Matrix { config: PathBuf },
    /// Membership-inference gap evaluation for one config.
    Mia { config: PathBuf },
    /// Replication retrieval of synthetic samples against the oracle pool.
    Retrieve { config: PathBuf },
}

fn out_dir(cli_out: &Option<PathBuf>, config_out: &Option<String>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| config_out.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("FEDGEN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_experiment(path: &Path, seeds: &Option<Vec<u64>>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_json_file(path)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_experiment(config, &cli.seeds)?;
            let dir = out_dir(&cli.out, &cfg.output_dir);
            let outcomes = experiment::run_experiment(&cfg, &dir)?;
            for o in &outcomes {
                println!(
                    "seed {}: {} final accuracy {:.4}, uplink {} B, downlink {} B",
                    o.seed,
                    cfg.protocol,
                    o.result.final_accuracy(),
                    o.result.ledger.uplink_bytes(),
                    o.result.ledger.downlink_bytes()
                );
            }
            println!("wrote {}", dir.join("results.csv").display());
            Ok(())
        }
        Command::Matrix { config } => {
            let mut matrix = MatrixConfig::from_json_file(config)?;
            if let Some(seeds) = &cli.seeds {
                matrix.seeds = seeds.clone();
            }
            let dir = out_dir(&cli.out, &matrix.base.output_dir);
            let run = experiment::run_matrix(&matrix, &dir, cli.jobs.max(1))?;
            println!("wrote {}", dir.join("matrix.csv").display());
            if run.failed_cells > 0 {
                return Err(Error::Protocol(format!("{} matrix cells failed", run.failed_cells)));
            }
            Ok(())
        }
        Command::Mia { config } => {
            let cfg = load_experiment(config, &cli.seeds)?;
            let dir = out_dir(&cli.out, &cfg.output_dir);
            let reports = experiment::run_mia(&cfg, &dir)?;
            for (seed, report) in &reports {
                for (name, gap) in report.gaps() {
                    println!("seed {seed}: {name} gap {:.4}", gap.abs_gap);
                }
            }
            println!("wrote {}", dir.join("mia.csv").display());
            Ok(())
        }
        Command::Retrieve { config } => {
            let cfg = load_experiment(config, &cli.seeds)?;
            let dir = out_dir(&cli.out, &cfg.output_dir);
            let reports = experiment::run_retrieval(&cfg, &dir)?;
            for (seed, report) in &reports {
                println!(
                    "seed {seed}: {} queries, flagged fraction {:.4}",
                    report.results.len(),
                    report.flagged_fraction()
                );
            }
            println!("wrote {}", dir.join("retrieval.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
