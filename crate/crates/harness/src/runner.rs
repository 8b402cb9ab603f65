//! Executes a (mode, seed) sweep: independent simulation instances across
//! worker threads, one CSV per run, then a single summary CSV.

use crate::csv::write_csv;
use crate::summary::{summarize, summary_csv, RunRecord};
use slicesim::config::{default_config, load_config, SimConfig};
use slicesim::metrics::RunTotals;
use slicesim::sim::{self, Mode};
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

/// One sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config_path: Option<PathBuf>,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub duration_s: u64,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

#[derive(Debug)]
pub enum RunnerError {
    Config(slicesim::config::ConfigError),
    Io(std::io::Error),
    Csv(crate::csv::CsvError),
    Summary(crate::summary::SummaryError),
    BadSpec(String),
}

impl std::fmt::Display for RunnerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunnerError::Config(e) => write!(f, "config error: {e}"),
            RunnerError::Io(e) => write!(f, "io error: {e}"),
            RunnerError::Csv(e) => write!(f, "{e}"),
            RunnerError::Summary(e) => write!(f, "summary error: {e}"),
            RunnerError::BadSpec(msg) => write!(f, "invalid run spec: {msg}"),
        }
    }
}

impl std::error::Error for RunnerError {}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e)
    }
}

/// File-name label for a mode: `static:2` becomes `static-2`.
pub fn mode_file_label(mode: Mode) -> String {
    mode.to_string().replace(':', "-")
}

/// CSV file name for one run.
pub fn run_file_name(mode: Mode, seed: u64) -> String {
    format!("{}_seed{}.csv", mode_file_label(mode), seed)
}

fn validate(spec: &RunSpec, cfg: &SimConfig) -> Result<(), RunnerError> {
    if spec.modes.is_empty() {
        return Err(RunnerError::BadSpec("at least one --mode is required".into()));
    }
    if spec.seeds.is_empty() {
        return Err(RunnerError::BadSpec("at least one seed is required".into()));
    }
    if spec.duration_s == 0 {
        return Err(RunnerError::BadSpec("duration must be positive".into()));
    }
    for mode in &spec.modes {
        if let Mode::Static { reserved } = mode {
            if *reserved < 1 || *reserved >= cfg.n_resources {
                return Err(RunnerError::BadSpec(format!(
                    "static reservation {reserved} must lie in 1..{}",
                    cfg.n_resources
                )));
            }
        }
    }
    Ok(())
}

/// Runs every (mode, seed) pair of the spec and returns the records in
/// deterministic (mode, seed) order. Pure compute; no files touched.
pub fn execute_runs(
    cfg: &SimConfig,
    modes: &[Mode],
    seeds: &[u64],
    duration_s: u64,
    jobs: usize,
) -> Vec<(RunRecord, RunTotals)> {
    let pairs: Vec<(usize, Mode, u64)> = modes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .enumerate()
        .map(|(i, (m, s))| (i, m, s))
        .collect();
    let total = pairs.len();
    let queue = Arc::new(Mutex::new(pairs));
    let (tx, rx) = mpsc::channel();
    let workers = jobs.max(1).min(total.max(1));
    let duration_slots = duration_s * sim::SLOTS_PER_WINDOW;

    let mut handles = Vec::new();
    for _ in 0..workers {
        let queue = Arc::clone(&queue);
        let tx = tx.clone();
        let cfg = cfg.clone();
        handles.push(std::thread::spawn(move || loop {
            let job = queue.lock().expect("queue lock").pop();
            let Some((index, mode, seed)) = job else {
                break;
            };
            let out = sim::run_with_totals(&cfg, mode, seed, duration_slots);
            let record = RunRecord {
                mode,
                seed,
                series: out.series,
            };
            tx.send((index, record, out.totals)).expect("collector alive");
        }));
    }
    drop(tx);

    let mut results: Vec<Option<(RunRecord, RunTotals)>> = (0..total).map(|_| None).collect();
    for (index, record, totals) in rx {
        results[index] = Some((record, totals));
    }
    for h in handles {
        h.join().expect("worker thread");
    }
    results.into_iter().map(|r| r.expect("all jobs ran")).collect()
}

/// Full sweep: load config, run everything, write one CSV per run plus
/// `summary.csv` into the output directory.
pub fn run_sweep(spec: &RunSpec) -> Result<(), RunnerError> {
    let cfg = match &spec.config_path {
        Some(path) => load_config(path).map_err(RunnerError::Config)?,
        None => default_config(),
    };
    validate(spec, &cfg)?;
    std::fs::create_dir_all(&spec.out_dir)?;

    let results = execute_runs(&cfg, &spec.modes, &spec.seeds, spec.duration_s, spec.jobs);
    for (record, totals) in &results {
        debug_assert!(totals.conservation_ok());
        let path = spec.out_dir.join(run_file_name(record.mode, record.seed));
        write_csv(&record.series, &path).map_err(RunnerError::Csv)?;
    }

    let records: Vec<RunRecord> = results.into_iter().map(|(r, _)| r).collect();
    let window = (spec.duration_s as usize).min(100);
    let summaries = summarize(&records, window).map_err(RunnerError::Summary)?;
    std::fs::write(spec.out_dir.join("summary.csv"), summary_csv(&summaries))?;
    Ok(())
}

/// Default parallelism for a spec: one worker per seed.
pub fn default_jobs(seeds: &[u64]) -> usize {
    seeds.len().max(1)
}
