//! CSV emission and parsing for run series. One row per aggregation window,
//! dot decimal separator, deterministic for a fixed run.

use slicesim::metrics::{MetricsSeries, SecondRecord};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "second,reward_per_s,samples_delivered_per_s,s1_rejected_per_s,\
s2_lost_per_s,s2_mean_latency_ms,learnslot_loss_mean,epsilon,rho";

#[derive(Debug)]
pub enum CsvError {
    Io(std::io::Error),
    BadHeader(String),
    BadRow { line: usize, text: String },
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvError::Io(e) => write!(f, "csv io error: {e}"),
            CsvError::BadHeader(h) => write!(f, "unexpected csv header: {h}"),
            CsvError::BadRow { line, text } => write!(f, "bad csv row at line {line}: {text}"),
        }
    }
}

impl std::error::Error for CsvError {}

impl From<std::io::Error> for CsvError {
    fn from(e: std::io::Error) -> Self {
        CsvError::Io(e)
    }
}

/// Renders the series as CSV text. Float formatting is shortest-round-trip,
/// so parsing recovers the values exactly.
pub fn csv_string(series: &MetricsSeries) -> String {
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &series.seconds {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.second,
            s.reward,
            s.samples_delivered,
            s.s1_rejected,
            s.s2_lost,
            s.s2_mean_latency_ms,
            s.learnslot_loss_mean,
            s.epsilon,
            s.rho
        ));
    }
    out
}

/// Writes one run's series to `path`.
pub fn write_csv(series: &MetricsSeries, path: impl AsRef<Path>) -> Result<(), CsvError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv_string(series).as_bytes())?;
    Ok(())
}

/// Parses CSV text produced by [`csv_string`].
pub fn parse_csv(text: &str) -> Result<MetricsSeries, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != CSV_HEADER {
        return Err(CsvError::BadHeader(header.to_string()));
    }
    let mut series = MetricsSeries::default();
    for (idx, row) in lines.enumerate() {
        let line = idx + 2;
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 9 {
            return Err(CsvError::BadRow {
                line,
                text: row.to_string(),
            });
        }
        let bad = || CsvError::BadRow {
            line,
            text: row.to_string(),
        };
        series.seconds.push(SecondRecord {
            second: fields[0].parse().map_err(|_| bad())?,
            reward: fields[1].parse().map_err(|_| bad())?,
            samples_delivered: fields[2].parse().map_err(|_| bad())?,
            s1_rejected: fields[3].parse().map_err(|_| bad())?,
            s2_lost: fields[4].parse().map_err(|_| bad())?,
            s2_mean_latency_ms: fields[5].parse().map_err(|_| bad())?,
            learnslot_loss_mean: fields[6].parse().map_err(|_| bad())?,
            epsilon: fields[7].parse().map_err(|_| bad())?,
            rho: fields[8].parse().map_err(|_| bad())?,
        });
    }
    Ok(series)
}

/// Reads a run CSV back into a series.
pub fn read_csv(path: impl AsRef<Path>) -> Result<MetricsSeries, CsvError> {
    parse_csv(&std::fs::read_to_string(path)?)
}
