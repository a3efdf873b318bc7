//! `fedsim` — run federated-training experiment grids from a JSON config.
//!
//! Exit codes: 0 on full success, 1 on configuration errors, 2 when some
//! grid cells failed but the run itself completed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedsim_core::error::Error;
use fedsim_core::experiment::{parse_config, partition_report, run_grid, CellOutcome, RunOptions};

#[derive(Parser)]
#[command(name = "fedsim", version, about = "Deterministic federated-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a config file.
    Run(RunArgs),
    /// Print shard sizes and label histograms for every grid cell.
    PartitionReport(PartitionReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Dump each chunk schedule as JSON next to the results.
    #[arg(long)]
    dump_schedule: bool,
    /// Comma-separated strategy labels to run (default: all).
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Substring filter on setting names (e.g. "noniid").
    #[arg(long)]
    grid_filter: Option<String>,
}

#[derive(Args)]
struct PartitionReportArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
}

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn load_config(path: &PathBuf) -> Result<fedsim_core::experiment::ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn exit_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_CONFIG,
    }
}

fn run(args: RunArgs) -> u8 {
    let cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let opts = RunOptions {
        out_override: args.out,
        seed_override: args.seed,
        strategy_filter: args.strategies,
        grid_filter: args.grid_filter,
        dump_schedules: args.dump_schedule,
        max_threads: None,
    };
    match run_grid(&cfg, &opts) {
        Ok(bundle) => {
            for cell in &bundle.cells {
                match &cell.outcome {
                    CellOutcome::Completed(series) => {
                        let last = series.records.last();
                        println!(
                            "ok   {} {} accuracy={:.4} macro_f1={:.4} sim_time={:.1}",
                            cell.setting,
                            cell.strategy,
                            last.map_or(0.0, |r| r.accuracy),
                            last.map_or(0.0, |r| r.macro_f1),
                            series.total_sim_time
                        );
                    }
                    CellOutcome::Failed(e) => {
                        println!("FAIL {} {} — {e}", cell.setting, cell.strategy);
                    }
                }
            }
            println!("results written to {}", bundle.output_dir.display());
            if bundle.all_completed() {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn report(args: PartitionReportArgs) -> u8 {
    match load_config(&args.config).and_then(|cfg| partition_report(&cfg)) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => run(args),
        Command::PartitionReport(args) => report(args),
    };
    ExitCode::from(code)
}
