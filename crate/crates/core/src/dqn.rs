//! The scheduling agent: observation construction, the dense value network
//! with hand-written backpropagation, Adam, the replay buffer, delta-action
//! selection, and temporal-difference training.
//!
//! The network is 13 -> 64 -> 32 -> 3 with rectifier hidden activations and
//! a linear output head, in double precision. The three outputs value the
//! allocation deltas (+1,-1), (0,0), (-1,+1) applied to the current
//! per-slice resource split.

use crate::learning_plane::ExperienceSample;
use crate::rng::RngStream;
use thiserror::Error;

pub const OBS_DIM: usize = 13;
pub const ACTION_COUNT: usize = 3;

/// The allocation change each action index applies to (a1, a2).
pub const ACTION_DELTAS: [(i64, i64); ACTION_COUNT] = [(1, -1), (0, 0), (-1, 1)];

/// A normalized 13-entry state vector, every entry in [0, 1]:
/// (q, T_min, T_max, T_avg, d, a) for slice 1, the same for slice 2, then
/// the slice-2 urgency count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

/// Latency statistics for one slice's served packets in one slot, in slots.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatencyStats {
    pub count: usize,
    pub min: u64,
    pub max: u64,
    pub sum: u64,
}

impl LatencyStats {
    pub fn record(&mut self, latency: u64) {
        if self.count == 0 {
            self.min = latency;
            self.max = latency;
        } else {
            self.min = self.min.min(latency);
            self.max = self.max.max(latency);
        }
        self.sum += latency;
        self.count += 1;
    }

    pub fn from_latencies(latencies: &[u64]) -> Self {
        let mut s = LatencyStats::default();
        for &l in latencies {
            s.record(l);
        }
        s
    }

    /// Per-latency clipping applied before aggregation.
    pub fn from_latencies_clipped(latencies: &[u64], clip: u64) -> Self {
        let mut s = LatencyStats::default();
        for &l in latencies {
            s.record(l.min(clip));
        }
        s
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

/// What the agent sees of one slice when building an observation.
#[derive(Debug, Clone, Copy)]
pub struct SliceView {
    pub queue_len: usize,
    /// Dropped or rejected packets in the previous slot.
    pub dropped_prev: usize,
    /// Resources currently allocated to the slice.
    pub allocation: usize,
    /// Served-latency statistics from the previous slot (slice 1 pre-clipped).
    pub latency_prev: LatencyStats,
}

/// Scale anchors that map raw state onto [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct ObsNormalizer {
    pub queue_capacity: usize,
    pub users1: usize,
    pub users2: usize,
    /// Resources the agent controls (N, or N - k under static reservation).
    pub n_data: usize,
    pub deadline_slots: u64,
    pub slice1_latency_clip: u64,
}

/// Builds the 13-entry observation. Slots in which a slice served nothing
/// yield zeros for that slice's latency entries.
pub fn observe(
    slice1: &SliceView,
    slice2: &SliceView,
    urgent2: usize,
    norm: &ObsNormalizer,
) -> Observation {
    let q_cap = norm.queue_capacity as f64;
    let lat_entries = |s: &LatencyStats, scale: f64| -> [f64; 3] {
        if s.count == 0 {
            [0.0; 3]
        } else {
            [
                s.min as f64 / scale,
                s.max as f64 / scale,
                s.mean() / scale,
            ]
        }
    };
    let l1 = lat_entries(&slice1.latency_prev, norm.slice1_latency_clip as f64);
    let l2 = lat_entries(&slice2.latency_prev, norm.deadline_slots as f64);
    let obs = Observation([
        slice1.queue_len as f64 / q_cap,
        l1[0],
        l1[1],
        l1[2],
        (slice1.dropped_prev as f64 / norm.users1 as f64).min(1.0),
        slice1.allocation as f64 / norm.n_data as f64,
        slice2.queue_len as f64 / q_cap,
        l2[0],
        l2[1],
        l2[2],
        (slice2.dropped_prev as f64 / norm.users2 as f64).min(1.0),
        slice2.allocation as f64 / norm.n_data as f64,
        urgent2 as f64 / q_cap,
    ]);
    debug_assert!(obs.0.iter().all(|v| (0.0..=1.0).contains(v)), "{obs:?}");
    obs
}

#[derive(Debug, Clone)]
struct Dense {
    in_dim: usize,
    out_dim: usize,
    /// Row-major: w[o * in_dim + i].
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Dense value network; rectifier on hidden layers, identity on the output.
#[derive(Debug, Clone)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Per-layer activation record from a traced forward pass.
#[derive(Debug, Default)]
pub struct ForwardTrace {
    /// activations[0] is the input; activations[i + 1] the post-activation
    /// output of layer i.
    activations: Vec<Vec<f64>>,
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Gradients {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in self.w.iter_mut().chain(self.b.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        let (layer, in_w, offset) = split_param_index(&self.w, &self.b, index);
        if in_w {
            self.w[layer][offset]
        } else {
            self.b[layer][offset]
        }
    }
}

fn split_param_index(w: &[Vec<f64>], b: &[Vec<f64>], mut index: usize) -> (usize, bool, usize) {
    for layer in 0..w.len() {
        if index < w[layer].len() {
            return (layer, true, index);
        }
        index -= w[layer].len();
        if index < b[layer].len() {
            return (layer, false, index);
        }
        index -= b[layer].len();
    }
    panic!("parameter index out of range");
}

fn locate_param(layers: &[Dense], mut index: usize) -> (usize, bool, usize) {
    for (li, l) in layers.iter().enumerate() {
        if index < l.w.len() {
            return (li, true, index);
        }
        index -= l.w.len();
        if index < l.b.len() {
            return (li, false, index);
        }
        index -= l.b.len();
    }
    panic!("parameter index out of range");
}

impl QNetwork {
    /// The agent architecture: OBS_DIM -> 64 -> 32 -> ACTION_COUNT.
    pub fn agent_default(rng: &mut RngStream) -> Self {
        QNetwork::new(&[OBS_DIM, 64, 32, ACTION_COUNT], rng)
    }

    /// Builds a network with uniform +-1/sqrt(fan_in) initialization for
    /// weights and biases.
    pub fn new(dims: &[usize], rng: &mut RngStream) -> Self {
        assert!(dims.len() >= 2, "need at least one layer");
        let layers = dims
            .windows(2)
            .map(|d| {
                let (in_dim, out_dim) = (d[0], d[1]);
                let bound = 1.0 / (in_dim as f64).sqrt();
                Dense {
                    in_dim,
                    out_dim,
                    w: (0..in_dim * out_dim)
                        .map(|_| rng.next_uniform(-bound, bound))
                        .collect(),
                    b: (0..out_dim).map(|_| rng.next_uniform(-bound, bound)).collect(),
                }
            })
            .collect();
        QNetwork { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn get_param(&self, index: usize) -> f64 {
        let (layer, in_w, offset) = locate_param(&self.layers, index);
        if in_w {
            self.layers[layer].w[offset]
        } else {
            self.layers[layer].b[offset]
        }
    }

    pub fn nudge_param(&mut self, index: usize, delta: f64) {
        let (layer, in_w, offset) = locate_param(&self.layers, index);
        if in_w {
            self.layers[layer].w[offset] += delta;
        } else {
            self.layers[layer].b[offset] += delta;
        }
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut trace = ForwardTrace::default();
        self.forward_traced(input, &mut trace);
        trace.activations.last().unwrap().clone()
    }

    /// Forward pass recording every activation for a later backward pass.
    /// Reuses the trace's buffers.
    pub fn forward_traced<'t>(&self, input: &[f64], trace: &'t mut ForwardTrace) -> &'t [f64] {
        assert_eq!(input.len(), self.input_dim());
        trace.activations.resize(self.layers.len() + 1, Vec::new());
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i + 1 == self.layers.len();
            let (before, after) = trace.activations.split_at_mut(i + 1);
            let x = &before[i];
            let out = &mut after[0];
            out.clear();
            out.reserve(layer.out_dim);
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = layer.b[o];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    acc += wi * xi;
                }
                out.push(if last { acc } else { acc.max(0.0) });
            }
        }
        trace.activations.last().unwrap()
    }

    /// Accumulates parameter gradients given the loss gradient at the output.
    /// `trace` must come from a `forward_traced` call on this network.
    pub fn backward(&self, trace: &ForwardTrace, d_output: &[f64], grads: &mut Gradients) {
        assert_eq!(d_output.len(), self.output_dim());
        let mut delta = d_output.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.activations[i];
            let gw = &mut grads.w[i];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, xi) in row.iter_mut().zip(x.iter()) {
                    *g += d * xi;
                }
                grads.b[i][o] += d;
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, wi) in prev.iter_mut().zip(row.iter()) {
                        *p += wi * d;
                    }
                }
                // Rectifier derivative: the traced post-activation is zero
                // exactly where the unit was inactive.
                for (p, &a) in prev.iter_mut().zip(trace.activations[i].iter()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Serializes all parameters, bit-exact, with a shape header.
    pub fn save_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "qnetwork v1");
        let _ = writeln!(out, "layers {}", self.layers.len());
        for layer in &self.layers {
            let _ = writeln!(out, "layer {} {}", layer.in_dim, layer.out_dim);
            for v in layer.w.iter().chain(layer.b.iter()) {
                let _ = writeln!(out, "{:016x}", v.to_bits());
            }
        }
        out
    }

    pub fn load_text(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(CheckpointError::Truncated)?;
        if header != "qnetwork v1" {
            return Err(CheckpointError::BadHeader);
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("layers "))
            .and_then(|n| n.parse().ok())
            .ok_or(CheckpointError::BadHeader)?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let shape = lines.next().ok_or(CheckpointError::Truncated)?;
            let mut parts = shape
                .strip_prefix("layer ")
                .ok_or(CheckpointError::BadHeader)?
                .split_whitespace();
            let in_dim: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(CheckpointError::BadHeader)?;
            let out_dim: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(CheckpointError::BadHeader)?;
            let mut values = Vec::with_capacity(in_dim * out_dim + out_dim);
            for _ in 0..in_dim * out_dim + out_dim {
                let raw = lines.next().ok_or(CheckpointError::Truncated)?;
                let bits =
                    u64::from_str_radix(raw, 16).map_err(|_| CheckpointError::BadValue)?;
                values.push(f64::from_bits(bits));
            }
            let b = values.split_off(in_dim * out_dim);
            layers.push(Dense {
                in_dim,
                out_dim,
                w: values,
                b,
            });
        }
        Ok(QNetwork { layers })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        std::fs::write(path, self.save_text())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        QNetwork::load_text(&text)
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a qnetwork checkpoint")]
    BadHeader,
    #[error("checkpoint ends early")]
    Truncated,
    #[error("malformed parameter value")]
    BadValue,
}

/// Copies online parameters into the target network.
pub fn sync_target(online: &QNetwork, target: &mut QNetwork) {
    target.layers.clone_from(&online.layers);
}

/// Adaptive moment estimation over the network parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &QNetwork, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m_w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            v_w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            m_b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            v_b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, layer) in net.layers.iter_mut().enumerate() {
            Self::update(
                &mut layer.w,
                &grads.w[i],
                &mut self.m_w[i],
                &mut self.v_w[i],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
            Self::update(
                &mut layer.b,
                &grads.b[i],
                &mut self.m_b[i],
                &mut self.v_b[i],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn update(
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        bc1: f64,
        bc2: f64,
    ) {
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Uniform-sampling circular experience store.
#[derive(Debug)]
pub struct ReplayBuffer {
    data: Vec<ExperienceSample>,
    next: usize,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, sample: ExperienceSample) {
        if self.data.len() < self.capacity {
            self.data.push(sample);
        } else {
            self.data[self.next] = sample;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Fills `out` with `batch` uniform draws (with replacement).
    pub fn sample_into(
        &self,
        batch: usize,
        rng: &mut RngStream,
        out: &mut Vec<ExperienceSample>,
    ) {
        assert!(!self.data.is_empty(), "cannot sample an empty buffer");
        out.clear();
        for _ in 0..batch {
            let idx = rng.next_range(self.data.len() as u64) as usize;
            out.push(self.data[idx]);
        }
    }
}

/// Linear exploration annealing over agent-controlled slots.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub decay_slots: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, agent_slots: u64) -> f64 {
        if agent_slots >= self.decay_slots {
            self.final_value
        } else {
            let frac = agent_slots as f64 / self.decay_slots as f64;
            self.initial - (self.initial - self.final_value) * frac
        }
    }
}

/// Epsilon-greedy pick over the action values: a uniform index with
/// probability epsilon, otherwise the argmax (lowest index wins ties).
pub fn select_action(values: &[f64; ACTION_COUNT], epsilon: f64, rng: &mut RngStream) -> usize {
    if rng.bernoulli(epsilon) {
        return rng.next_range(ACTION_COUNT as u64) as usize;
    }
    let mut best = 0;
    for i in 1..ACTION_COUNT {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Applies an action's delta to the allocation; moves that would push either
/// component outside [0, n_data] clamp to a no-op. The component sum is
/// always preserved.
pub fn apply_delta(alloc: (usize, usize), action: usize, n_data: usize) -> (usize, usize) {
    debug_assert_eq!(alloc.0 + alloc.1, n_data);
    let (d1, d2) = ACTION_DELTAS[action];
    let a1 = alloc.0 as i64 + d1;
    let a2 = alloc.1 as i64 + d2;
    if a1 < 0 || a2 < 0 || a1 > n_data as i64 || a2 > n_data as i64 {
        alloc
    } else {
        (a1 as usize, a2 as usize)
    }
}

/// Squared TD error of one (state, action, target) probe; the finite
/// difference oracle in the tests differentiates this.
pub fn action_value_loss(net: &QNetwork, obs: &Observation, action: usize, target: f64) -> f64 {
    let q = net.forward(&obs.0)[action];
    (q - target) * (q - target)
}

/// Analytic gradient of `action_value_loss`.
pub fn action_value_loss_gradient(
    net: &QNetwork,
    obs: &Observation,
    action: usize,
    target: f64,
) -> Gradients {
    let mut grads = Gradients::zeros_like(net);
    let mut trace = ForwardTrace::default();
    let out = net.forward_traced(&obs.0, &mut trace);
    let mut d_out = vec![0.0; net.output_dim()];
    d_out[action] = 2.0 * (out[action] - target);
    net.backward(&trace, &d_out, &mut grads);
    grads
}

/// One minibatch step of temporal-difference learning: the target is
/// r + gamma * max over the target network's values at the next state (the
/// task is continuing, so the bootstrap term never zeroes out). Returns the
/// pre-step mean squared TD error.
pub fn train_step(
    online: &mut QNetwork,
    target: &QNetwork,
    batch: &[ExperienceSample],
    gamma: f64,
    opt: &mut Adam,
) -> f64 {
    assert!(!batch.is_empty(), "train_step requires a nonempty batch");
    let mut grads = Gradients::zeros_like(online);
    let mut trace = ForwardTrace::default();
    let mut target_trace = ForwardTrace::default();
    let mut d_out = vec![0.0; online.output_dim()];
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let next_values = target.forward_traced(&s.next_observation.0, &mut target_trace);
        let best_next = next_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y = s.reward + gamma * best_next;
        let out = online.forward_traced(&s.observation.0, &mut trace);
        let err = out[s.action] - y;
        loss += err * err;
        d_out.iter_mut().for_each(|v| *v = 0.0);
        d_out[s.action] = 2.0 * err * scale;
        online.backward(&trace, &d_out, &mut grads);
    }
    opt.step(online, &grads);
    loss * scale
}
