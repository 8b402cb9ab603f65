//! Per-run metric aggregation: fixed 1000-slot windows (one second at the
//! reference slot duration) plus whole-run conservation totals.

/// One aggregation window of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondRecord {
    pub second: u64,
    /// Summed QoS reward over the window.
    pub reward: f64,
    /// Experience samples that completed uplink transport in the window.
    pub samples_delivered: u64,
    pub s1_rejected: u64,
    /// Slice-2 rejections plus deadline drops.
    pub s2_lost: u64,
    /// Mean served slice-2 latency in milliseconds; 0 when nothing served.
    pub s2_mean_latency_ms: f64,
    /// Mean learning-slot reward loss; 0 when the window had no learning slots.
    pub learnslot_loss_mean: f64,
    /// Exploration rate at the window's end.
    pub epsilon: f64,
    /// Learning-slot probability at the window's first slot.
    pub rho: f64,
}

/// The per-window series for one run, in window order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    pub seconds: Vec<SecondRecord>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.seconds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seconds.is_empty()
    }

    /// Mean of `f` over the last `window` records.
    pub fn tail_mean(&self, window: usize, f: impl Fn(&SecondRecord) -> f64) -> f64 {
        let n = self.seconds.len();
        let start = n.saturating_sub(window);
        let slice = &self.seconds[start..];
        if slice.is_empty() {
            return 0.0;
        }
        slice.iter().map(f).sum::<f64>() / slice.len() as f64
    }
}

/// Whole-run conservation counters and learning-slot loss tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunTotals {
    pub arrivals: [u64; 2],
    pub rejected: [u64; 2],
    pub expired2: u64,
    pub served: [u64; 2],
    pub final_queue: [u64; 2],
    pub samples_offered: u64,
    pub samples_early_rejected: u64,
    pub samples_delivered: u64,
    pub samples_pending: u64,
    pub learning_slots: u64,
    pub learning_loss_zero: u64,
    pub learning_loss_le_tenth: u64,
}

impl RunTotals {
    /// Packet conservation per slice and sample conservation.
    pub fn conservation_ok(&self) -> bool {
        let slice1 = self.arrivals[0]
            == self.rejected[0] + self.served[0] + self.final_queue[0];
        let slice2 = self.arrivals[1]
            == self.rejected[1] + self.expired2 + self.served[1] + self.final_queue[1];
        let samples = self.samples_offered
            == self.samples_early_rejected + self.samples_delivered + self.samples_pending;
        slice1 && slice2 && samples
    }
}
