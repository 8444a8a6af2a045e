//! The `run` command: execute an experiment and write its outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use alsim::experiment::{prepare_data, run_experiment_on, ExperimentConfig, ExperimentResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};
use crate::output::*;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ALSIM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "alsim-out";

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    /// SHA-256 of the effective experiment config (after overrides).
    pub config_hash: String,
    pub base_seed: u64,
    pub trials: usize,
    pub jobs: usize,
    pub wall_time_secs: f64,
    pub fitted_schedules: Vec<(String, alsim::sampling::PowerSchedule)>,
    pub files: Vec<String>,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serialises");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Output directory precedence: flag, config file, environment, default.
pub fn resolve_output_dir(flag: Option<&Path>, file: Option<&Path>) -> PathBuf {
    flag.or(file)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Runs the experiment on a pool of `jobs` threads. Results do not depend on
/// the pool size.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> CliResult<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| {
        let data = prepare_data(config)?;
        Ok(run_experiment_on(config, &data)?)
    })
}

/// Writes every output file for `result` into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
) -> CliResult<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(CliError::output(dir))?;
    write_csv(&dir.join("curves.csv"), &CURVES_HEADER, &curve_rows(result))?;
    write_csv(&dir.join("aggregate.csv"), &AGGREGATE_HEADER, &aggregate_rows(config, result)?)?;
    write_csv(&dir.join("gains.csv"), &GAINS_HEADER, &gain_rows(config, result)?)?;
    write_csv(&dir.join("batches.csv"), &BATCHES_HEADER, &batch_rows(result))?;
    write_csv(&dir.join("composition.csv"), &COMPOSITION_HEADER, &composition_rows(result))?;
    write_csv(&dir.join("events.csv"), &EVENTS_HEADER, &event_rows(result))?;
    write_trials_jsonl(&dir.join("trials.jsonl"), result)?;
    Ok([
        "curves.csv",
        "aggregate.csv",
        "gains.csv",
        "batches.csv",
        "composition.csv",
        "events.csv",
        "trials.jsonl",
        "manifest.json",
    ]
    .map(String::from)
    .to_vec())
}

/// Applies overrides, runs, and writes outputs plus `manifest.json`.
/// Returns the output directory.
pub fn cmd_run(file: &ConfigFile, opts: &RunOptions) -> CliResult<PathBuf> {
    let mut config = file.experiment.clone();
    if let Some(t) = opts.trials {
        config.trials = t;
    }
    if let Some(s) = opts.seed {
        config.base_seed = s;
    }
    config.validate()?;
    let dir = resolve_output_dir(opts.out.as_deref(), file.output_dir.as_deref());
    // fail before the run if the directory cannot be created
    std::fs::create_dir_all(&dir).map_err(CliError::output(&dir))?;
    let jobs = opts
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let started = Instant::now();
    log::info!(
        "running {} trials of {} schemes on {jobs} threads",
        config.trials,
        config.schemes.len()
    );
    let result = execute(&config, jobs)?;
    let files = write_outputs(&dir, &config, &result)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(&config),
        base_seed: config.base_seed,
        trials: config.trials,
        jobs,
        wall_time_secs: started.elapsed().as_secs_f64(),
        fitted_schedules: result.fitted_schedules.clone(),
        files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(CliError::output(&path))?;
    Ok(dir)
}
