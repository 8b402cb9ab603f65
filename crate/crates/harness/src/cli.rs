//! Command-line parsing. Kept dependency-free so exit codes and messages
//! stay exactly as documented: 0 success, 1 usage error, 2 runtime failure,
//! 3 acceptance-check failure.

use crate::runner::{default_jobs, RunSpec};
use slicesim::sim::Mode;
use std::path::PathBuf;

pub const USAGE: &str = "\
slicesim - two-slice resource allocation simulator with an in-band learning plane

USAGE:
  slicesim --mode <MODE> [--mode <MODE>...] --seed <LIST> --duration-s <SECONDS>
           [--config <PATH>] [--out <DIR>] [--jobs <N>]
  slicesim --check [--jobs <N>]

MODES:
  dynamic       learning slots drawn with probability rho(t), greedy split inside
  oob           out-of-band baseline: free infinite side channel for samples
  static:<k>    k resources per slot permanently reserved for the learning plane

OPTIONS:
  --config <PATH>      config overrides in `key = value` text form
  --mode <MODE>        benchmark mode; repeatable
  --seed <LIST>        comma-separated seeds, e.g. 1,2,3
  --duration-s <SECS>  simulated seconds per run (1000 slots each)
  --out <DIR>          output directory (default: out)
  --jobs <N>           concurrent runs (default: number of seeds)
  --check              run the acceptance suite and print pass/fail lines
";

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run(RunSpec),
    Check { jobs: usize },
}

#[derive(Debug, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn parse_mode(text: &str) -> Result<Mode, UsageError> {
    match text {
        "dynamic" => Ok(Mode::Dynamic),
        "oob" => Ok(Mode::OutOfBand),
        _ => {
            if let Some(k) = text.strip_prefix("static:") {
                let reserved: usize = k
                    .parse()
                    .map_err(|_| UsageError(format!("bad static reservation: {k}")))?;
                Ok(Mode::Static { reserved })
            } else {
                Err(UsageError(format!("unknown mode: {text}")))
            }
        }
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, UsageError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| UsageError(format!("bad seed: {s}")))
        })
        .collect()
}

pub fn parse_args(args: &[String]) -> Result<Command, UsageError> {
    let mut config_path: Option<PathBuf> = None;
    let mut modes: Vec<Mode> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    let mut duration_s: Option<u64> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut jobs: Option<usize> = None;
    let mut check = false;

    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value = |name: &str| -> Result<&String, UsageError> {
            it.next()
                .ok_or_else(|| UsageError(format!("{name} requires a value")))
        };
        match arg.as_str() {
            "--config" => config_path = Some(PathBuf::from(value("--config")?)),
            "--mode" => modes.push(parse_mode(value("--mode")?)?),
            "--seed" => seeds.extend(parse_seeds(value("--seed")?)?),
            "--duration-s" => {
                let raw = value("--duration-s")?;
                duration_s = Some(raw.parse().map_err(|_| {
                    UsageError(format!("bad duration: {raw}"))
                })?);
            }
            "--out" => out_dir = Some(PathBuf::from(value("--out")?)),
            "--jobs" => {
                let raw = value("--jobs")?;
                jobs =
                    Some(raw.parse().map_err(|_| UsageError(format!("bad jobs: {raw}")))?);
            }
            "--check" => check = true,
            "--help" | "-h" => return Err(UsageError(String::new())),
            other => return Err(UsageError(format!("unknown flag: {other}"))),
        }
    }

    if check {
        let default_jobs = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(2);
        return Ok(Command::Check {
            jobs: jobs.unwrap_or(default_jobs),
        });
    }
    if modes.is_empty() {
        return Err(UsageError("at least one --mode is required".into()));
    }
    if seeds.is_empty() {
        return Err(UsageError("--seed is required".into()));
    }
    let duration_s =
        duration_s.ok_or_else(|| UsageError("--duration-s is required".into()))?;
    if duration_s == 0 {
        return Err(UsageError("duration must be positive".into()));
    }
    let jobs = jobs.unwrap_or_else(|| default_jobs(&seeds));
    Ok(Command::Run(RunSpec {
        config_path,
        modes,
        seeds,
        duration_s,
        out_dir: out_dir.unwrap_or_else(|| PathBuf::from("out")),
        jobs,
    }))
}
