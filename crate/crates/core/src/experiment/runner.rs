//! Grid runner: executes every (setting x strategy) cell, persists
//! per-round CSV series, plot-ready panel CSVs, a summary, and a run
//! manifest sufficient to replay the run bit for bit.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.json                  config echo, seeds, version, timestamp
//! summary.json                   per-cell status and final metrics
//! series/<setting>__<label>.csv  one row per round
//! panels/<setting>.csv           iteration,strategy,accuracy,macro_f1,sim_time
//! schedules/<setting>__<label>.json   (with schedule dumps enabled)
//! ```
//!
//! Cells are independent: a failure is recorded in the summary and the
//! remaining cells still run. Worker count is capped by the
//! `FEDSIM_THREADS` environment variable.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::partition;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsRecord};
use crate::nn::{init_model, ActivationKind, LayerSpec};
use crate::runtime::{CostModel, World};
use crate::strategies::{build_strategy, run_training, StrategyKind};
use crate::experiment::config::{derive_seed, ExperimentConfig, GridCell, StrategySpec};
use crate::{Dataset, Optimizer};

/// Runtime switches (CLI flags) that do not live in the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_override: Option<PathBuf>,
    pub seed_override: Option<u64>,
    /// Keep only strategies whose label is listed.
    pub strategy_filter: Option<Vec<String>>,
    /// Keep only settings whose name contains this substring.
    pub grid_filter: Option<String>,
    pub dump_schedules: bool,
    pub max_threads: Option<usize>,
}

/// Completed series of one cell.
#[derive(Debug, Clone)]
pub struct CellSeries {
    pub records: Vec<MetricsRecord>,
    pub schedule: Option<serde_json::Value>,
    pub total_sim_time: f64,
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    Completed(CellSeries),
    Failed(String),
}

/// One grid cell's identity plus its outcome.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub setting: String,
    pub strategy: String,
    pub outcome: CellOutcome,
}

/// Everything a grid run produced, in memory plus on disk.
#[derive(Debug)]
pub struct ResultsBundle {
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub num_classes: usize,
    pub cells: Vec<CellResult>,
}

impl ResultsBundle {
    pub fn all_completed(&self) -> bool {
        self.cells
            .iter()
            .all(|c| matches!(c.outcome, CellOutcome::Completed(_)))
    }

    pub fn failed_cells(&self) -> Vec<&CellResult> {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Failed(_)))
            .collect()
    }
}

fn worker_count(opts: &RunOptions, cells: usize) -> usize {
    let configured = opts.max_threads.or_else(|| {
        std::env::var("FEDSIM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    configured.unwrap_or(available).clamp(1, cells.max(1))
}

/// Trains and evaluates one cell. Pure: everything it needs arrives as
/// arguments, so cells can run on any worker in any order.
fn run_cell(
    cfg: &ExperimentConfig,
    master_seed: u64,
    train: &Dataset,
    test: &Dataset,
    cell: &GridCell,
    strategy_spec: &StrategySpec,
) -> Result<CellSeries> {
    let setting = cell.setting_name();
    let label = strategy_spec.label();
    let shards = partition(train, &cell.partition_spec(master_seed))?;

    let mut specs = Vec::with_capacity(cfg.hidden_layers.len() + 1);
    let mut input = train.dim();
    for &width in &cfg.hidden_layers {
        specs.push(LayerSpec::new(input, width, ActivationKind::Relu));
        input = width;
    }
    specs.push(LayerSpec::new(input, train.num_classes, ActivationKind::Identity));
    let model = init_model(
        &specs,
        derive_seed(master_seed, &["model", &setting, &label]),
    )?;

    let strategy_cfg = strategy_spec.to_strategy_config(cfg.iterations);
    let optimizer = Optimizer::new(strategy_cfg.optimizer, &model.to_params());
    let mut world = World::new(model, optimizer, shards, CostModel::default());
    let mut strategy = build_strategy(&strategy_cfg)?;
    let series = run_training(strategy.as_mut(), &mut world, cfg.iterations, |m| {
        evaluate(m, test)
    })?;

    let records = series
        .into_iter()
        .map(|r| MetricsRecord {
            strategy: label.clone(),
            setting: setting.clone(),
            round: r.round,
            sim_time: r.sim_time,
            accuracy: r.evaluation.accuracy,
            macro_f1: r.evaluation.macro_f1,
            per_class: r.evaluation.per_class,
        })
        .collect::<Vec<_>>();
    let total_sim_time = records.last().map_or(0.0, |r| r.sim_time);
    Ok(CellSeries {
        schedule: strategy.schedule_json(),
        records,
        total_sim_time,
    })
}

#[derive(Serialize)]
struct ManifestCell {
    setting: String,
    strategy: String,
    partition_seed: u64,
    model_seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    created_at_unix: u64,
    crate_version: &'static str,
    master_seed: u64,
    config: &'a ExperimentConfig,
    cells: Vec<ManifestCell>,
}

#[derive(Serialize)]
struct SummaryCell {
    setting: String,
    strategy: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_macro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_sim_time: Option<f64>,
}

/// Runs the whole grid and persists the bundle.
pub fn run_grid(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ResultsBundle> {
    let master_seed = opts.seed_override.unwrap_or(cfg.master_seed);
    let output_dir = opts
        .out_override
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(output_dir.join("series"))?;
    std::fs::create_dir_all(output_dir.join("panels"))?;
    if opts.dump_schedules {
        std::fs::create_dir_all(output_dir.join("schedules"))?;
    }

    let (train, test) = cfg.dataset.build(master_seed)?;

    let strategies: Vec<&StrategySpec> = cfg
        .strategies
        .iter()
        .filter(|s| {
            opts.strategy_filter
                .as_ref()
                .is_none_or(|keep| keep.contains(&s.label()))
        })
        .collect();
    let grid: Vec<&GridCell> = cfg
        .grid
        .iter()
        .filter(|c| {
            opts.grid_filter
                .as_ref()
                .is_none_or(|pat| c.setting_name().contains(pat.as_str()))
        })
        .collect();
    if strategies.is_empty() || grid.is_empty() {
        return Err(Error::config(
            "filters removed every grid cell; nothing to run",
        ));
    }

    let jobs: Vec<(usize, &GridCell, &StrategySpec)> = grid
        .iter()
        .flat_map(|cell| strategies.iter().map(move |s| (*cell, *s)))
        .enumerate()
        .map(|(i, (c, s))| (i, c, s))
        .collect();
    let workers = worker_count(opts, jobs.len());

    let mut outcomes: Vec<Option<CellResult>> = vec![None; jobs.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..workers {
            let jobs = &jobs;
            let train = &train;
            let test = &test;
            handles.push(scope.spawn(move || {
                let mut done = Vec::new();
                for (idx, cell, strategy_spec) in jobs.iter().skip(worker).step_by(workers) {
                    let outcome = match run_cell(cfg, master_seed, train, test, cell, strategy_spec)
                    {
                        Ok(series) => CellOutcome::Completed(series),
                        Err(e) => CellOutcome::Failed(e.to_string()),
                    };
                    done.push((
                        *idx,
                        CellResult {
                            setting: cell.setting_name(),
                            strategy: strategy_spec.label(),
                            outcome,
                        },
                    ));
                }
                done
            }));
        }
        for handle in handles {
            for (idx, result) in handle.join().expect("cell worker panicked") {
                outcomes[idx] = Some(result);
            }
        }
    });
    let cells: Vec<CellResult> = outcomes.into_iter().map(|c| c.expect("all cells ran")).collect();

    let bundle = ResultsBundle {
        output_dir: output_dir.clone(),
        master_seed,
        num_classes: train.num_classes,
        cells,
    };
    write_series_files(&bundle)?;
    emit_plot_data(&bundle)?;
    if opts.dump_schedules {
        write_schedule_dumps(&bundle)?;
    }
    write_summary(&bundle)?;
    write_manifest(cfg, master_seed, &bundle, &grid, &strategies)?;
    Ok(bundle)
}

fn cell_file_stem(setting: &str, strategy: &str) -> String {
    format!("{setting}__{strategy}")
}

fn write_series_files(bundle: &ResultsBundle) -> Result<()> {
    for cell in &bundle.cells {
        let CellOutcome::Completed(series) = &cell.outcome else {
            continue;
        };
        let mut text = MetricsRecord::csv_header(bundle.num_classes);
        text.push('\n');
        for record in &series.records {
            text.push_str(&record.to_csv_row());
            text.push('\n');
        }
        let path = bundle
            .output_dir
            .join("series")
            .join(format!("{}.csv", cell_file_stem(&cell.setting, &cell.strategy)));
        std::fs::write(path, text)?;
    }
    Ok(())
}

/// One plot-ready CSV per setting (figure panel): every strategy's
/// accuracy/macro-F1/sim-time series over the iterations.
pub fn emit_plot_data(bundle: &ResultsBundle) -> Result<Vec<PathBuf>> {
    let mut settings: Vec<String> = bundle.cells.iter().map(|c| c.setting.clone()).collect();
    settings.dedup();
    let mut written = Vec::new();
    for setting in settings {
        let mut rows = Vec::new();
        for cell in bundle.cells.iter().filter(|c| c.setting == setting) {
            match &cell.outcome {
                CellOutcome::Completed(series) => {
                    for record in &series.records {
                        rows.push(format!(
                            "{},{},{},{},{}",
                            record.round,
                            record.strategy,
                            record.accuracy,
                            record.macro_f1,
                            record.sim_time
                        ));
                    }
                }
                CellOutcome::Failed(_) => {
                    // Panel still emitted from the surviving strategies.
                    eprintln!(
                        "warning: panel {setting} is missing strategy {} (cell failed)",
                        cell.strategy
                    );
                }
            }
        }
        if rows.is_empty() {
            eprintln!("warning: panel {setting} has no completed series; skipped");
            continue;
        }
        let mut text = String::from("iteration,strategy,accuracy,macro_f1,sim_time\n");
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = bundle.output_dir.join("panels").join(format!("{setting}.csv"));
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

fn write_schedule_dumps(bundle: &ResultsBundle) -> Result<()> {
    for cell in &bundle.cells {
        let CellOutcome::Completed(series) = &cell.outcome else {
            continue;
        };
        let Some(schedule) = &series.schedule else {
            continue;
        };
        let path = bundle
            .output_dir
            .join("schedules")
            .join(format!("{}.json", cell_file_stem(&cell.setting, &cell.strategy)));
        std::fs::write(path, serde_json::to_string_pretty(schedule)?)?;
    }
    Ok(())
}

fn write_summary(bundle: &ResultsBundle) -> Result<()> {
    let cells: Vec<SummaryCell> = bundle
        .cells
        .iter()
        .map(|cell| match &cell.outcome {
            CellOutcome::Completed(series) => {
                let last = series.records.last();
                SummaryCell {
                    setting: cell.setting.clone(),
                    strategy: cell.strategy.clone(),
                    status: "ok",
                    error: None,
                    final_accuracy: last.map(|r| r.accuracy),
                    final_macro_f1: last.map(|r| r.macro_f1),
                    total_sim_time: Some(series.total_sim_time),
                }
            }
            CellOutcome::Failed(error) => SummaryCell {
                setting: cell.setting.clone(),
                strategy: cell.strategy.clone(),
                status: "failed",
                error: Some(error.clone()),
                final_accuracy: None,
                final_macro_f1: None,
                total_sim_time: None,
            },
        })
        .collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({ "cells": cells }))?;
    std::fs::write(bundle.output_dir.join("summary.json"), json)?;
    Ok(())
}

fn write_manifest(
    cfg: &ExperimentConfig,
    master_seed: u64,
    bundle: &ResultsBundle,
    grid: &[&GridCell],
    strategies: &[&StrategySpec],
) -> Result<()> {
    let cells = grid
        .iter()
        .flat_map(|cell| {
            strategies.iter().map(move |s| ManifestCell {
                setting: cell.setting_name(),
                strategy: s.label(),
                partition_seed: cell.partition_spec(master_seed).seed,
                model_seed: derive_seed(master_seed, &["model", &cell.setting_name(), &s.label()]),
            })
        })
        .collect();
    let manifest = Manifest {
        created_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        crate_version: env!("CARGO_PKG_VERSION"),
        master_seed,
        config: cfg,
        cells,
    };
    std::fs::write(
        bundle.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Human-readable shard sizes and label histograms for every grid cell.
pub fn partition_report(cfg: &ExperimentConfig) -> Result<String> {
    let (train, _) = cfg.dataset.build(cfg.master_seed)?;
    let mut out = String::new();
    for cell in &cfg.grid {
        let setting = cell.setting_name();
        out.push_str(&format!("setting {setting}\n"));
        match partition(&train, &cell.partition_spec(cfg.master_seed)) {
            Ok(shards) => {
                for shard in &shards {
                    let mut histogram = vec![0usize; train.num_classes];
                    for &label in &shard.labels {
                        histogram[label] += 1;
                    }
                    out.push_str(&format!(
                        "  client {:>3}  size {:>6}  labels {:?}\n",
                        shard.client_id,
                        shard.size(),
                        histogram
                    ));
                }
            }
            Err(e) => out.push_str(&format!("  error: {e}\n")),
        }
    }
    Ok(out)
}

/// True when a strategy kind produces a schedule worth dumping.
pub fn has_schedule(kind: StrategyKind) -> bool {
    matches!(kind, StrategyKind::Proposed | StrategyKind::ProposedSemi)
}

/// Reads entire CSV files back; test helper for byte-identity checks.
pub fn read_all_csv_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for sub in ["series", "panels"] {
        let path = dir.join(sub);
        if !path.is_dir() {
            continue;
        }
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for entry in entries {
            let name = format!(
                "{}/{}",
                sub,
                entry.file_name().unwrap_or_default().to_string_lossy()
            );
            files.push((name, std::fs::read(&entry)?));
        }
    }
    Ok(files)
}
