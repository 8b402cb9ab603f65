//! Simulation configuration: the full parameter set with validated defaults,
//! plus a flat `key = value` text format for overrides.
//!
//! All durations are stored in slots; conversion to seconds happens only at
//! reporting time, which keeps slot arithmetic free of floating-point time
//! accumulation.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Parse { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid config: {key}: {reason}")]
    Invalid { key: String, reason: String },
}

/// Every use-case and agent parameter, with defaults matching the reference
/// scenario. See `SimConfig::default_config` for the values.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// N: resource blocks available per slot.
    pub n_resources: usize,
    /// tau: slot duration in seconds (reporting only; dynamics are per-slot).
    pub slot_duration_s: f64,
    /// Q: per-slice packet queue capacity.
    pub queue_capacity: usize,
    /// L: packet size in bytes.
    pub packet_size_bytes: usize,

    pub slice1_users: usize,
    /// R_1: per-active-user rate in bytes/s.
    pub slice1_rate_bytes_per_s: f64,
    /// O^(1): row-stochastic activity transitions, row 0 = inactive.
    pub slice1_activity: [[f64; 2]; 2],

    pub slice2_users: usize,
    pub slice2_rate_bytes_per_s: f64,
    pub slice2_activity: [[f64; 2]; 2],
    /// T_max for slice 2, in slots.
    pub deadline_slots: u64,

    /// gamma: discount factor.
    pub discount: f64,
    /// E: experience sample queue capacity (samples).
    pub learning_queue_capacity: usize,
    /// ell: uplink packets required per experience sample.
    pub fragments_per_sample: usize,
    /// rho_0 / rho_f / sigma / H: learning-slot probability schedule.
    pub rho_0: f64,
    pub rho_f: f64,
    pub sigma: f64,
    pub decay_pace_slots: u64,
    /// chi_1: slice-1 queue length above which the greedy allocator serves it.
    pub pressure_threshold: usize,

    // Agent hyperparameters.
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Delivered samples required before training starts.
    pub train_warmup_samples: u64,
    /// Target network refresh period, in training steps.
    pub target_sync_period: u64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Agent-slot count over which epsilon anneals linearly.
    pub epsilon_decay_slots: u64,
    /// Slice-1 served latencies are clipped here before normalization.
    pub slice1_latency_clip_slots: u64,
}

/// Returns the reference scenario parameters.
pub fn default_config() -> SimConfig {
    SimConfig {
        n_resources: 15,
        slot_duration_s: 1e-3,
        queue_capacity: 1500,
        packet_size_bytes: 512,
        slice1_users: 16,
        slice1_rate_bytes_per_s: 512_000.0,
        slice1_activity: [[0.5, 0.5], [0.92, 0.08]],
        slice2_users: 17,
        slice2_rate_bytes_per_s: 512_000.0,
        slice2_activity: [[0.5, 0.5], [0.5, 0.5]],
        deadline_slots: 70,
        discount: 0.95,
        learning_queue_capacity: 1500,
        fragments_per_sample: 3,
        rho_0: 0.2,
        rho_f: 0.01,
        sigma: 8e-4,
        decay_pace_slots: 1000,
        pressure_threshold: 1400,
        learning_rate: 1e-3,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        adam_epsilon: 1e-8,
        batch_size: 32,
        replay_capacity: 100_000,
        train_warmup_samples: 1000,
        target_sync_period: 1000,
        epsilon_initial: 1.0,
        epsilon_final: 0.02,
        epsilon_decay_slots: 200_000,
        slice1_latency_clip_slots: 500,
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        default_config()
    }
}

impl SimConfig {
    /// Checks every invariant; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(key: &str, reason: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                reason: reason.into(),
            })
        }
        fn positive(v: f64) -> bool {
            v.is_finite() && v > 0.0
        }
        if self.n_resources < 1 {
            return fail("n_resources", "must be >= 1");
        }
        if !positive(self.slot_duration_s) {
            return fail("slot_duration_s", "must be > 0");
        }
        if self.packet_size_bytes == 0 {
            return fail("packet_size_bytes", "must be > 0");
        }
        for (name, m) in [
            ("slice1_activity", &self.slice1_activity),
            ("slice2_activity", &self.slice2_activity),
        ] {
            for (r, row) in m.iter().enumerate() {
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return fail(name, format!("row {r} entries must be in [0, 1]"));
                }
                if (row[0] + row[1] - 1.0).abs() > 1e-12 {
                    return fail(name, format!("row {r} must sum to 1"));
                }
            }
            if m[0][1] + m[1][0] == 0.0 {
                return fail(name, "chain has no stationary distribution");
            }
        }
        for (name, r) in [
            ("slice1_rate_bytes_per_s", self.slice1_rate_bytes_per_s),
            ("slice2_rate_bytes_per_s", self.slice2_rate_bytes_per_s),
        ] {
            if !positive(r) {
                return fail(name, "must be > 0");
            }
        }
        if !(0.0..=1.0).contains(&self.rho_f) || !(0.0..=1.0).contains(&self.rho_0) {
            return fail("rho_0", "rho_0 and rho_f must be in [0, 1]");
        }
        if self.rho_f > self.rho_0 {
            return fail("rho_f", "must satisfy rho_f <= rho_0");
        }
        if !positive(self.sigma) {
            return fail("sigma", "must be > 0");
        }
        if self.decay_pace_slots < 1 {
            return fail("decay_pace_slots", "must be >= 1");
        }
        if self.pressure_threshold > self.queue_capacity {
            return fail("pressure_threshold", "must be <= queue_capacity");
        }
        if self.fragments_per_sample < 1 {
            return fail("fragments_per_sample", "must be >= 1");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return fail("discount", "must be in [0, 1)");
        }
        // The greedy objective needs the 1/E learning weight strictly below
        // the 1/M slice weight.
        if self.learning_queue_capacity <= 2 {
            return fail("learning_queue_capacity", "must be > 2");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be >= 1");
        }
        if self.replay_capacity < self.batch_size {
            return fail("replay_capacity", "must be >= batch_size");
        }
        if !(0.0..=1.0).contains(&self.epsilon_initial)
            || !(0.0..=1.0).contains(&self.epsilon_final)
        {
            return fail("epsilon_initial", "epsilon bounds must be in [0, 1]");
        }
        if self.epsilon_final > self.epsilon_initial {
            return fail("epsilon_final", "must be <= epsilon_initial");
        }
        if self.epsilon_decay_slots < 1 {
            return fail("epsilon_decay_slots", "must be >= 1");
        }
        if self.target_sync_period < 1 {
            return fail("target_sync_period", "must be >= 1");
        }
        if !positive(self.learning_rate) {
            return fail("learning_rate", "must be > 0");
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return fail(name, "must be in [0, 1)");
            }
        }
        if !positive(self.adam_epsilon) {
            return fail("adam_epsilon", "must be > 0");
        }
        if self.slice1_latency_clip_slots < 1 {
            return fail("slice1_latency_clip_slots", "must be >= 1");
        }
        // Arrivals are integral packets per slot per active user.
        for (name, rate) in [
            ("slice1_rate_bytes_per_s", self.slice1_rate_bytes_per_s),
            ("slice2_rate_bytes_per_s", self.slice2_rate_bytes_per_s),
        ] {
            let per_slot =
                (rate * self.slot_duration_s / self.packet_size_bytes as f64).round();
            if per_slot < 1.0 {
                return fail(name, "rate must be at least one packet per slot per user");
            }
        }
        Ok(())
    }

    /// Packets emitted per active user per slot: round(R * tau / L).
    pub fn packets_per_slot(&self, rate_bytes_per_s: f64) -> usize {
        (rate_bytes_per_s * self.slot_duration_s / self.packet_size_bytes as f64).round()
            as usize
    }

    /// Serializes to the `key = value` text format; reparsing yields an
    /// equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("n_resources", self.n_resources.to_string());
        kv("slot_duration_s", self.slot_duration_s.to_string());
        kv("queue_capacity", self.queue_capacity.to_string());
        kv("packet_size_bytes", self.packet_size_bytes.to_string());
        kv("slice1_users", self.slice1_users.to_string());
        kv(
            "slice1_rate_bytes_per_s",
            self.slice1_rate_bytes_per_s.to_string(),
        );
        kv("slice1_o00", self.slice1_activity[0][0].to_string());
        kv("slice1_o01", self.slice1_activity[0][1].to_string());
        kv("slice1_o10", self.slice1_activity[1][0].to_string());
        kv("slice1_o11", self.slice1_activity[1][1].to_string());
        kv("slice2_users", self.slice2_users.to_string());
        kv(
            "slice2_rate_bytes_per_s",
            self.slice2_rate_bytes_per_s.to_string(),
        );
        kv("slice2_o00", self.slice2_activity[0][0].to_string());
        kv("slice2_o01", self.slice2_activity[0][1].to_string());
        kv("slice2_o10", self.slice2_activity[1][0].to_string());
        kv("slice2_o11", self.slice2_activity[1][1].to_string());
        kv("deadline_slots", self.deadline_slots.to_string());
        kv("discount", self.discount.to_string());
        kv(
            "learning_queue_capacity",
            self.learning_queue_capacity.to_string(),
        );
        kv(
            "fragments_per_sample",
            self.fragments_per_sample.to_string(),
        );
        kv("rho_0", self.rho_0.to_string());
        kv("rho_f", self.rho_f.to_string());
        kv("sigma", self.sigma.to_string());
        kv("decay_pace_slots", self.decay_pace_slots.to_string());
        kv("pressure_threshold", self.pressure_threshold.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_epsilon", self.adam_epsilon.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("replay_capacity", self.replay_capacity.to_string());
        kv(
            "train_warmup_samples",
            self.train_warmup_samples.to_string(),
        );
        kv("target_sync_period", self.target_sync_period.to_string());
        kv("epsilon_initial", self.epsilon_initial.to_string());
        kv("epsilon_final", self.epsilon_final.to_string());
        kv("epsilon_decay_slots", self.epsilon_decay_slots.to_string());
        kv(
            "slice1_latency_clip_slots",
            self.slice1_latency_clip_slots.to_string(),
        );
        out
    }
}

/// Parses config text: defaults overridden by `key = value` lines. Blank
/// lines and `#` comments are ignored; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = default_config();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            text: stripped.to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut cfg, key, value, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn apply_key(cfg: &mut SimConfig, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        })
    }
    match key {
        "n_resources" => cfg.n_resources = parse(key, value, line)?,
        "slot_duration_s" => cfg.slot_duration_s = parse(key, value, line)?,
        "queue_capacity" => cfg.queue_capacity = parse(key, value, line)?,
        "packet_size_bytes" => cfg.packet_size_bytes = parse(key, value, line)?,
        "slice1_users" => cfg.slice1_users = parse(key, value, line)?,
        "slice1_rate_bytes_per_s" => cfg.slice1_rate_bytes_per_s = parse(key, value, line)?,
        "slice1_o00" => cfg.slice1_activity[0][0] = parse(key, value, line)?,
        "slice1_o01" => cfg.slice1_activity[0][1] = parse(key, value, line)?,
        "slice1_o10" => cfg.slice1_activity[1][0] = parse(key, value, line)?,
        "slice1_o11" => cfg.slice1_activity[1][1] = parse(key, value, line)?,
        "slice2_users" => cfg.slice2_users = parse(key, value, line)?,
        "slice2_rate_bytes_per_s" => cfg.slice2_rate_bytes_per_s = parse(key, value, line)?,
        "slice2_o00" => cfg.slice2_activity[0][0] = parse(key, value, line)?,
        "slice2_o01" => cfg.slice2_activity[0][1] = parse(key, value, line)?,
        "slice2_o10" => cfg.slice2_activity[1][0] = parse(key, value, line)?,
        "slice2_o11" => cfg.slice2_activity[1][1] = parse(key, value, line)?,
        "deadline_slots" => cfg.deadline_slots = parse(key, value, line)?,
        "discount" => cfg.discount = parse(key, value, line)?,
        "learning_queue_capacity" => cfg.learning_queue_capacity = parse(key, value, line)?,
        "fragments_per_sample" => cfg.fragments_per_sample = parse(key, value, line)?,
        "rho_0" => cfg.rho_0 = parse(key, value, line)?,
        "rho_f" => cfg.rho_f = parse(key, value, line)?,
        "sigma" => cfg.sigma = parse(key, value, line)?,
        "decay_pace_slots" => cfg.decay_pace_slots = parse(key, value, line)?,
        "pressure_threshold" => cfg.pressure_threshold = parse(key, value, line)?,
        "learning_rate" => cfg.learning_rate = parse(key, value, line)?,
        "adam_beta1" => cfg.adam_beta1 = parse(key, value, line)?,
        "adam_beta2" => cfg.adam_beta2 = parse(key, value, line)?,
        "adam_epsilon" => cfg.adam_epsilon = parse(key, value, line)?,
        "batch_size" => cfg.batch_size = parse(key, value, line)?,
        "replay_capacity" => cfg.replay_capacity = parse(key, value, line)?,
        "train_warmup_samples" => cfg.train_warmup_samples = parse(key, value, line)?,
        "target_sync_period" => cfg.target_sync_period = parse(key, value, line)?,
        "epsilon_initial" => cfg.epsilon_initial = parse(key, value, line)?,
        "epsilon_final" => cfg.epsilon_final = parse(key, value, line)?,
        "epsilon_decay_slots" => cfg.epsilon_decay_slots = parse(key, value, line)?,
        "slice1_latency_clip_slots" => cfg.slice1_latency_clip_slots = parse(key, value, line)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_scenario() {
        let cfg = default_config();
        assert_eq!(cfg.n_resources, 15);
        assert_eq!(cfg.deadline_slots, 70);
        assert_eq!(cfg.pressure_threshold, 1400);
        assert_eq!(cfg.queue_capacity, 1500);
        assert_eq!(cfg.learning_queue_capacity, 1500);
        assert_eq!(cfg.fragments_per_sample, 3);
        assert_eq!(cfg.rho_0, 0.2);
        assert_eq!(cfg.rho_f, 0.01);
        assert_eq!(cfg.sigma, 8e-4);
        assert_eq!(cfg.decay_pace_slots, 1000);
        assert_eq!(cfg.discount, 0.95);
        cfg.validate().unwrap();
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), default_config());
    }

    #[test]
    fn single_override() {
        let cfg = parse_config("n_resources = 6\n").unwrap();
        let mut expected = default_config();
        expected.n_resources = 6;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = parse_config("# a comment\n\nn_resources = 6 # trailing\n").unwrap();
        assert_eq!(cfg.n_resources, 6);
    }

    #[test]
    fn invariant_violation_names_key() {
        let err = parse_config("rho_0 = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("rho_0"), "got: {err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("bogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
    }

    #[test]
    fn bad_value_reports_key() {
        let err = parse_config("n_resources = soup\n").unwrap_err();
        assert!(err.to_string().contains("n_resources"));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = default_config();
        cfg.n_resources = 7;
        cfg.rho_0 = 0.123456789;
        let reparsed = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn load_missing_file_errors() {
        assert!(matches!(
            load_config("/nonexistent/path/cfg.txt"),
            Err(ConfigError::Io(_))
        ));
    }

    #[test]
    fn row_sum_invariant_enforced() {
        let err = parse_config("slice1_o00 = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("slice1_activity"), "got: {err}");
    }

    #[test]
    fn degenerate_activity_chain_rejected() {
        let text = "slice2_o00 = 1\nslice2_o01 = 0\nslice2_o10 = 0\nslice2_o11 = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("stationary"), "got: {err}");
    }
}
