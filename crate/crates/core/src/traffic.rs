//! Per-user on-off traffic sources and the closed-form aggregate chain used
//! to validate them.
//!
//! Each user follows a two-state Markov chain: inactive users emit nothing,
//! active users emit a fixed number of packets per slot. The aggregate
//! active-user count is itself a Markov chain whose transition probabilities
//! have a binomial-convolution closed form, which the tests use as an oracle
//! against the per-user simulation.

use crate::config::SimConfig;
use crate::rng::RngStream;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("stationary distribution undefined: both off-diagonal transition probabilities are zero")]
    DegenerateChain,
}

/// One slice's source population.
#[derive(Debug, Clone)]
pub struct TrafficModel {
    /// Maximum number of users.
    pub users: usize,
    /// Per-active-user rate in bytes/s.
    pub rate_bytes_per_s: f64,
    /// Row-stochastic activity transitions; row 0 = inactive, row 1 = active.
    pub activity: [[f64; 2]; 2],
    /// Packets emitted per active user per slot.
    pub packets_per_slot: usize,
}

impl TrafficModel {
    pub fn slice1(cfg: &SimConfig) -> Self {
        TrafficModel {
            users: cfg.slice1_users,
            rate_bytes_per_s: cfg.slice1_rate_bytes_per_s,
            activity: cfg.slice1_activity,
            packets_per_slot: cfg.packets_per_slot(cfg.slice1_rate_bytes_per_s),
        }
    }

    pub fn slice2(cfg: &SimConfig) -> Self {
        TrafficModel {
            users: cfg.slice2_users,
            rate_bytes_per_s: cfg.slice2_rate_bytes_per_s,
            activity: cfg.slice2_activity,
            packets_per_slot: cfg.packets_per_slot(cfg.slice2_rate_bytes_per_s),
        }
    }

    /// Long-run probability that a user is active: O01 / (O01 + O10).
    pub fn stationary_active_prob(&self) -> Result<f64, TrafficError> {
        let denom = self.activity[0][1] + self.activity[1][0];
        if denom == 0.0 {
            return Err(TrafficError::DegenerateChain);
        }
        Ok(self.activity[0][1] / denom)
    }
}

/// Per-user activity vector for one slice.
#[derive(Debug, Clone)]
pub struct TrafficState {
    active: Vec<bool>,
}

impl TrafficState {
    /// All users inactive.
    pub fn all_inactive(model: &TrafficModel) -> Self {
        TrafficState {
            active: vec![false; model.users],
        }
    }

    /// Each user drawn independently from the stationary distribution, which
    /// avoids warm-up transients in offered-load statistics.
    pub fn stationary(model: &TrafficModel, rng: &mut RngStream) -> Result<Self, TrafficError> {
        let p = model.stationary_active_prob()?;
        Ok(TrafficState {
            active: (0..model.users).map(|_| rng.bernoulli(p)).collect(),
        })
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Advances every user one slot and returns the packet arrivals, counted
/// from the post-transition state.
pub fn step(state: &mut TrafficState, model: &TrafficModel, rng: &mut RngStream) -> usize {
    debug_assert_eq!(state.active.len(), model.users);
    let mut active = 0usize;
    for user in &mut state.active {
        let p_active = if *user {
            model.activity[1][1]
        } else {
            model.activity[0][1]
        };
        *user = rng.bernoulli(p_active);
        active += *user as usize;
    }
    active * model.packets_per_slot
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// P(u_{t+1} = v | u_t = u) for the aggregate active-user chain:
/// sum over w = number of active users that stay active.
/// Panics if either count exceeds the user population.
pub fn aggregate_transition_prob(u: usize, v: usize, model: &TrafficModel) -> f64 {
    let n = model.users;
    assert!(u <= n && v <= n, "active counts must lie in 0..=users");
    let o = &model.activity;
    let w_lo = (u + v).saturating_sub(n);
    let w_hi = u.min(v);
    let mut total = 0.0;
    for w in w_lo..=w_hi {
        total += o[1][1].powi(w as i32)
            * o[1][0].powi((u - w) as i32)
            * binomial(u, w)
            * binomial(n - u, v - w)
            * o[0][1].powi((v - w) as i32)
            * o[0][0].powi((n + w - u - v) as i32);
    }
    total
}

/// Expected offered traffic in bytes/s: O01 * U * R / (O01 + O10).
pub fn expected_traffic(model: &TrafficModel) -> Result<f64, TrafficError> {
    Ok(model.stationary_active_prob()? * model.users as f64 * model.rate_bytes_per_s)
}

/// Total channel capacity in bytes/s: N * L / tau.
pub fn capacity(cfg: &SimConfig) -> f64 {
    (cfg.n_resources * cfg.packet_size_bytes) as f64 / cfg.slot_duration_s
}
