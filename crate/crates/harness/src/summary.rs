//! Cross-run summary statistics: per-mode tail means and deviations over
//! seeds, plus time-to-threshold against the out-of-band reference.

use slicesim::metrics::MetricsSeries;
use slicesim::sim::Mode;

/// One finished run as the summarizer sees it.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub mode: Mode,
    pub seed: u64,
    pub series: MetricsSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MeanStd { mean, std }
}

/// Per-mode aggregate over seeds of tail-window statistics.
#[derive(Debug, Clone)]
pub struct ModeSummary {
    pub mode: Mode,
    pub seeds: usize,
    pub tail_reward: MeanStd,
    pub tail_s1_rejected: MeanStd,
    pub tail_s2_lost: MeanStd,
    pub tail_s2_latency_ms: MeanStd,
    pub tail_learnslot_loss: MeanStd,
    /// First second whose trailing 30-s mean reward reaches 95% of the
    /// out-of-band tail mean; aggregated over the seeds that reach it.
    /// Absent when the run set contains no out-of-band reference.
    pub time_to_threshold_s: Option<MeanStd>,
}

#[derive(Debug)]
pub enum SummaryError {
    MismatchedDurations,
    Empty,
}

impl std::fmt::Display for SummaryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SummaryError::MismatchedDurations => write!(f, "runs have different durations"),
            SummaryError::Empty => write!(f, "no runs to summarize"),
        }
    }
}

impl std::error::Error for SummaryError {}

const TREND_WINDOW_S: usize = 30;

/// First second whose trailing 30-s mean reward reaches the threshold.
fn time_to_threshold(series: &MetricsSeries, threshold: f64) -> Option<u64> {
    let rewards: Vec<f64> = series.seconds.iter().map(|s| s.reward).collect();
    if rewards.len() < TREND_WINDOW_S {
        return None;
    }
    let mut window_sum: f64 = rewards[..TREND_WINDOW_S].iter().sum();
    for end in TREND_WINDOW_S..=rewards.len() {
        if window_sum / TREND_WINDOW_S as f64 >= threshold {
            return Some(series.seconds[end - 1].second);
        }
        if end < rewards.len() {
            window_sum += rewards[end] - rewards[end - TREND_WINDOW_S];
        }
    }
    None
}

/// Summarizes runs over the last `window_s` seconds per mode. All runs must
/// share one duration.
pub fn summarize(runs: &[RunRecord], window_s: usize) -> Result<Vec<ModeSummary>, SummaryError> {
    if runs.is_empty() {
        return Err(SummaryError::Empty);
    }
    let duration = runs[0].series.len();
    if runs.iter().any(|r| r.series.len() != duration) {
        return Err(SummaryError::MismatchedDurations);
    }

    let oob_tail: Vec<f64> = runs
        .iter()
        .filter(|r| r.mode == Mode::OutOfBand)
        .map(|r| r.series.tail_mean(window_s, |s| s.reward))
        .collect();
    let oob_reference = if oob_tail.is_empty() {
        None
    } else {
        Some(oob_tail.iter().sum::<f64>() / oob_tail.len() as f64)
    };

    // Group by mode, preserving first-seen order.
    let mut modes: Vec<Mode> = Vec::new();
    for r in runs {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }

    let summaries = modes
        .into_iter()
        .map(|mode| {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.mode == mode).collect();
            let tail =
                |f: &dyn Fn(&slicesim::metrics::SecondRecord) -> f64| -> Vec<f64> {
                    group
                        .iter()
                        .map(|r| r.series.tail_mean(window_s, f))
                        .collect()
                };
            let time_to_threshold_s = oob_reference.map(|oob| {
                let reached: Vec<f64> = group
                    .iter()
                    .filter_map(|r| time_to_threshold(&r.series, 0.95 * oob))
                    .map(|s| s as f64)
                    .collect();
                mean_std(&reached)
            });
            ModeSummary {
                mode,
                seeds: group.len(),
                tail_reward: mean_std(&tail(&|s| s.reward)),
                tail_s1_rejected: mean_std(&tail(&|s| s.s1_rejected as f64)),
                tail_s2_lost: mean_std(&tail(&|s| s.s2_lost as f64)),
                tail_s2_latency_ms: mean_std(&tail(&|s| s.s2_mean_latency_ms)),
                tail_learnslot_loss: mean_std(&tail(&|s| s.learnslot_loss_mean)),
                time_to_threshold_s,
            }
        })
        .collect();
    Ok(summaries)
}

/// Renders the summary table as CSV.
pub fn summary_csv(summaries: &[ModeSummary]) -> String {
    let mut out = String::from(
        "mode,seeds,tail_reward_mean,tail_reward_std,tail_s1_rejected_mean,\
         tail_s1_rejected_std,tail_s2_lost_mean,tail_s2_lost_std,\
         tail_s2_latency_ms_mean,tail_s2_latency_ms_std,tail_learnslot_loss_mean,\
         tail_learnslot_loss_std,time_to_threshold_s_mean,time_to_threshold_s_std\n",
    );
    for s in summaries {
        let (tt_mean, tt_std) = match s.time_to_threshold_s {
            Some(ms) => (ms.mean.to_string(), ms.std.to_string()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.mode,
            s.seeds,
            s.tail_reward.mean,
            s.tail_reward.std,
            s.tail_s1_rejected.mean,
            s.tail_s1_rejected.std,
            s.tail_s2_lost.mean,
            s.tail_s2_lost.std,
            s.tail_s2_latency_ms.mean,
            s.tail_s2_latency_ms.std,
            s.tail_learnslot_loss.mean,
            s.tail_learnslot_loss.std,
            tt_mean,
            tt_std
        ));
    }
    out
}
