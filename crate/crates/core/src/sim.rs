//! The slot loop: traffic, expiry, enqueue, slot typing, allocation,
//! service, learning transport, sample generation, cloud training, metrics.
//!
//! Three benchmark modes share the loop. `Dynamic` draws learning slots with
//! probability rho(t) and runs the greedy split in them; `OutOfBand` ships
//! every sample over a free side channel; `Static(k)` permanently reserves k
//! resources per slot for the learning plane and shrinks the agent's action
//! space to N - k resources.

use crate::config::SimConfig;
use crate::dqn::{
    apply_delta, observe, select_action, sync_target, Adam, EpsilonSchedule, LatencyStats,
    ObsNormalizer, Observation, QNetwork, ReplayBuffer, SliceView,
};
use crate::greedy::{greedy_allocate, AllocationVector, GreedyInputs};
use crate::learning_plane::{
    draw_slot_type, ExperienceSample, LearningQueue, RhoSchedule, SlotType,
};
use crate::metrics::{MetricsSeries, RunTotals, SecondRecord};
use crate::queueing::{slot_reward, QueuePolicy, SliceId, SliceQueue};
use crate::rng::{substream, RngStream, StreamLabel};
use crate::traffic::{self, TrafficModel, TrafficState};

/// Slots per aggregation window (one second at the reference slot duration).
pub const SLOTS_PER_WINDOW: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Learning slots drawn with probability rho(t); greedy split inside them.
    Dynamic,
    /// Training data uses a free infinite side channel.
    OutOfBand,
    /// k resources per slot permanently reserved for the learning plane.
    Static { reserved: usize },
}

impl Mode {
    /// Resources the agent allocates between the slices.
    pub fn n_data(&self, n_resources: usize) -> usize {
        match self {
            Mode::Static { reserved } => n_resources - reserved,
            _ => n_resources,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Dynamic => write!(f, "dynamic"),
            Mode::OutOfBand => write!(f, "oob"),
            Mode::Static { reserved } => write!(f, "static:{reserved}"),
        }
    }
}

/// Everything one slot did, for tests and debugging.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub slot: u64,
    pub slot_type: SlotType,
    /// Resources given to each consumer; for agent slots the learning
    /// component is 0 (static-mode transport is capped separately).
    pub allocation: AllocationVector,
    pub arrivals: [usize; 2],
    pub rejected: [usize; 2],
    pub expired2: usize,
    pub served_latencies1: Vec<u64>,
    pub served_latencies2: Vec<u64>,
    pub reward: f64,
    pub fragments_sent: usize,
    pub samples_delivered: usize,
    pub sample_offered: bool,
    pub sample_accepted: bool,
    /// Learning slots only.
    pub reward_loss: Option<f64>,
}

/// One-step reward shortfall of a learning slot against the counterfactual
/// that gives every resource to the queues (slice-2 urgent packets first,
/// then FIFO across both queues, slice 2 before slice 1), normalized to
/// [0, 1]. Under the step QoS every post-expiry queued packet scores 1 when
/// served now, so the counterfactual reward reduces to min(N, q1 + q2)
/// whatever the serving order.
pub fn reward_loss(q1_len: usize, q2_len: usize, achieved_reward: f64, n_resources: usize) -> f64 {
    let reference = n_resources.min(q1_len + q2_len) as f64;
    (reference - achieved_reward) / n_resources as f64
}

#[derive(Debug, Clone, Copy, Default)]
struct PrevSlice {
    dropped: usize,
    stats: LatencyStats,
}

#[derive(Debug, Default)]
struct WindowAccum {
    reward: f64,
    delivered: u64,
    s1_rejected: u64,
    s2_lost: u64,
    lat2_sum: u64,
    lat2_count: u64,
    loss_sum: f64,
    loss_count: u64,
}

/// A single simulation instance. Strictly single-threaded and deterministic
/// for a fixed (config, mode, seed).
pub struct Simulation {
    cfg: SimConfig,
    mode: Mode,
    n_data: usize,
    slot: u64,
    model1: TrafficModel,
    model2: TrafficModel,
    state1: TrafficState,
    state2: TrafficState,
    q1: SliceQueue,
    q2: SliceQueue,
    lqueue: LearningQueue,
    rho_sched: RhoSchedule,
    epsilon_sched: EpsilonSchedule,
    online: QNetwork,
    target: QNetwork,
    opt: Adam,
    replay: ReplayBuffer,
    alloc: (usize, usize),
    agent_slots: u64,
    train_steps: u64,
    delivered_total: u64,
    prev1: PrevSlice,
    prev2: PrevSlice,
    norm: ObsNormalizer,
    rng_traffic: RngStream,
    rng_slot: RngStream,
    rng_reject: RngStream,
    rng_explore: RngStream,
    rng_replay: RngStream,
    batch_buf: Vec<ExperienceSample>,
    window: WindowAccum,
    series: MetricsSeries,
    totals: RunTotals,
}

impl Simulation {
    pub fn new(cfg: SimConfig, mode: Mode, seed: u64) -> Self {
        cfg.validate().expect("config must be valid");
        if let Mode::Static { reserved } = mode {
            assert!(
                reserved >= 1 && reserved < cfg.n_resources,
                "static reservation must lie in 1..N"
            );
        }
        let n_data = mode.n_data(cfg.n_resources);
        let model1 = TrafficModel::slice1(&cfg);
        let model2 = TrafficModel::slice2(&cfg);
        let mut rng_traffic = substream(seed, StreamLabel::Traffic);
        let state1 = TrafficState::stationary(&model1, &mut rng_traffic)
            .expect("validated config has a stationary distribution");
        let state2 = TrafficState::stationary(&model2, &mut rng_traffic)
            .expect("validated config has a stationary distribution");
        let mut rng_init = substream(seed, StreamLabel::WeightInit);
        let online = QNetwork::agent_default(&mut rng_init);
        let target = online.clone();
        let opt = Adam::new(
            &online,
            cfg.learning_rate,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_epsilon,
        );
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        let norm = ObsNormalizer {
            queue_capacity: cfg.queue_capacity,
            users1: cfg.slice1_users,
            users2: cfg.slice2_users,
            n_data,
            deadline_slots: cfg.deadline_slots,
            slice1_latency_clip: cfg.slice1_latency_clip_slots,
        };
        Simulation {
            q1: SliceQueue::new(SliceId::One, cfg.queue_capacity, QueuePolicy::RejectOnly),
            q2: SliceQueue::new(
                SliceId::Two,
                cfg.queue_capacity,
                QueuePolicy::RejectAndDeadline {
                    deadline_slots: cfg.deadline_slots,
                },
            ),
            lqueue: LearningQueue::new(cfg.learning_queue_capacity, cfg.fragments_per_sample),
            rho_sched: RhoSchedule::from_config(&cfg),
            epsilon_sched: EpsilonSchedule {
                initial: cfg.epsilon_initial,
                final_value: cfg.epsilon_final,
                decay_slots: cfg.epsilon_decay_slots,
            },
            // Even initial split, remainder to slice 1.
            alloc: (n_data - n_data / 2, n_data / 2),
            agent_slots: 0,
            train_steps: 0,
            delivered_total: 0,
            prev1: PrevSlice::default(),
            prev2: PrevSlice::default(),
            norm,
            rng_traffic,
            rng_slot: substream(seed, StreamLabel::SlotType),
            rng_reject: substream(seed, StreamLabel::Rejection),
            rng_explore: substream(seed, StreamLabel::Exploration),
            rng_replay: substream(seed, StreamLabel::Replay),
            batch_buf: Vec::with_capacity(cfg.batch_size),
            window: WindowAccum::default(),
            series: MetricsSeries::default(),
            totals: RunTotals::default(),
            slot: 0,
            n_data,
            model1,
            model2,
            state1,
            state2,
            online,
            target,
            opt,
            replay,
            mode,
            cfg,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// The agent's current per-slice split.
    pub fn allocation(&self) -> (usize, usize) {
        self.alloc
    }

    pub fn online_network(&self) -> &QNetwork {
        &self.online
    }

    fn observe_now(&self, urgent2: usize) -> Observation {
        let s1 = SliceView {
            queue_len: self.q1.len(),
            dropped_prev: self.prev1.dropped,
            allocation: self.alloc.0,
            latency_prev: self.prev1.stats,
        };
        let s2 = SliceView {
            queue_len: self.q2.len(),
            dropped_prev: self.prev2.dropped,
            allocation: self.alloc.1,
            latency_prev: self.prev2.stats,
        };
        observe(&s1, &s2, urgent2, &self.norm)
    }

    fn update_prev(
        &mut self,
        rejected1: usize,
        rejected2: usize,
        expired2: usize,
        lat1: &[u64],
        lat2: &[u64],
    ) {
        self.prev1 = PrevSlice {
            dropped: rejected1,
            stats: LatencyStats::from_latencies_clipped(lat1, self.cfg.slice1_latency_clip_slots),
        };
        self.prev2 = PrevSlice {
            dropped: rejected2 + expired2,
            stats: LatencyStats::from_latencies(lat2),
        };
    }

    /// Runs one slot through the canonical sequence and returns what happened.
    pub fn step(&mut self) -> SlotOutcome {
        let t = self.slot;

        // (1) Traffic, (2) slice-2 expiry, (3) enqueue with rejection.
        let arr1 = traffic::step(&mut self.state1, &self.model1, &mut self.rng_traffic);
        let arr2 = traffic::step(&mut self.state2, &self.model2, &mut self.rng_traffic);
        let expired2 = self.q2.expire(t);
        let (_, rej1) = self.q1.enqueue(arr1, t);
        let (_, rej2) = self.q2.enqueue(arr2, t);

        // (4) Slot typing: only the dynamic mode has learning slots.
        let slot_type = match self.mode {
            Mode::Dynamic => draw_slot_type(t, &self.rho_sched, &mut self.rng_slot),
            _ => SlotType::Drl,
        };

        let outcome = match slot_type {
            SlotType::Drl => self.agent_slot(t, arr1, arr2, rej1, rej2, expired2),
            SlotType::Learning => self.learning_slot(t, arr1, arr2, rej1, rej2, expired2),
        };

        debug_assert!(
            outcome.served_latencies1.len()
                + outcome.served_latencies2.len()
                + outcome.fragments_sent
                <= self.cfg.n_resources
        );

        self.accumulate_metrics(&outcome);
        self.slot += 1;
        outcome
    }

    /// An agent-controlled slot: observe, epsilon-greedy delta, serve,
    /// transport (static mode only), generate and offer a sample, train.
    fn agent_slot(
        &mut self,
        t: u64,
        arr1: usize,
        arr2: usize,
        rej1: usize,
        rej2: usize,
        expired2: usize,
    ) -> SlotOutcome {
        // (5) Allocation by the agent's policy.
        let urgent2 = self.q2.urgent_count(t);
        let obs = self.observe_now(urgent2);
        let out = self.online.forward(&obs.0);
        let values = [out[0], out[1], out[2]];
        let epsilon = self.epsilon_sched.value(self.agent_slots);
        let action = select_action(&values, epsilon, &mut self.rng_explore);
        self.alloc = apply_delta(self.alloc, action, self.n_data);
        self.agent_slots += 1;

        // (6) Service and reward.
        let lat1 = self.q1.serve(self.alloc.0, t);
        let lat2 = self.q2.serve(self.alloc.1, t);
        let reward = slot_reward(&lat1, &lat2, self.cfg.deadline_slots);

        // (7) Learning transport: only the static reservation sends in agent
        // slots; dynamic agent slots give the data plane everything.
        let (mut delivered, fragments_sent) = match self.mode {
            Mode::Static { reserved } => self.lqueue.transmit(reserved),
            _ => (Vec::new(), 0),
        };

        // (8) Experience sample: state at decision time, reward scaled to
        // [0, 1], successor state after the slot completed.
        self.update_prev(rej1, rej2, expired2, &lat1, &lat2);
        let next_obs = self.observe_now(self.q2.urgent_count(t));
        let sample = ExperienceSample {
            observation: obs,
            action,
            reward: reward / self.cfg.n_resources as f64,
            next_observation: next_obs,
        };
        self.totals.samples_offered += 1;
        let accepted = match self.mode {
            Mode::OutOfBand => {
                // Free side channel: accepted and delivered immediately.
                delivered.push(sample);
                true
            }
            _ => {
                let ok = self.lqueue.offer(sample, &mut self.rng_reject);
                if !ok {
                    self.totals.samples_early_rejected += 1;
                }
                ok
            }
        };

        // (9) Cloud ingest and one training step.
        let delivered_count = delivered.len();
        self.ingest_and_train(delivered);

        SlotOutcome {
            slot: t,
            slot_type: SlotType::Drl,
            allocation: AllocationVector {
                slice1: self.alloc.0,
                slice2: self.alloc.1,
                learning: 0,
            },
            arrivals: [arr1, arr2],
            rejected: [rej1, rej2],
            expired2,
            served_latencies1: lat1,
            served_latencies2: lat2,
            reward,
            fragments_sent,
            samples_delivered: delivered_count,
            sample_offered: true,
            sample_accepted: accepted,
            reward_loss: None,
        }
    }

    /// A learning slot (dynamic mode only): greedy split over all N
    /// resources, no agent action, no experience sample.
    fn learning_slot(
        &mut self,
        t: u64,
        arr1: usize,
        arr2: usize,
        rej1: usize,
        rej2: usize,
        expired2: usize,
    ) -> SlotOutcome {
        let urgent2 = self.q2.urgent_count(t);
        let inputs = GreedyInputs {
            q1: self.q1.len(),
            q2: self.q2.len(),
            urgent2,
            backlog_fragments: self.lqueue.backlog_fragments(),
            n_resources: self.cfg.n_resources,
            pressure_threshold: self.cfg.pressure_threshold,
            e_capacity: self.cfg.learning_queue_capacity,
        };
        let z = greedy_allocate(&inputs);
        let (q1_pre, q2_pre) = (self.q1.len(), self.q2.len());

        let lat1 = self.q1.serve(z.slice1, t);
        let lat2 = self.q2.serve(z.slice2, t);
        let reward = slot_reward(&lat1, &lat2, self.cfg.deadline_slots);
        let (delivered, fragments_sent) = self.lqueue.transmit(z.learning);

        let loss = reward_loss(q1_pre, q2_pre, reward, self.cfg.n_resources);
        self.totals.learning_slots += 1;
        if loss == 0.0 {
            self.totals.learning_loss_zero += 1;
        }
        if loss <= 0.1 {
            self.totals.learning_loss_le_tenth += 1;
        }

        self.update_prev(rej1, rej2, expired2, &lat1, &lat2);
        let delivered_count = delivered.len();
        self.ingest_and_train(delivered);

        SlotOutcome {
            slot: t,
            slot_type: SlotType::Learning,
            allocation: z,
            arrivals: [arr1, arr2],
            rejected: [rej1, rej2],
            expired2,
            served_latencies1: lat1,
            served_latencies2: lat2,
            reward,
            fragments_sent,
            samples_delivered: delivered_count,
            sample_offered: false,
            sample_accepted: false,
            reward_loss: Some(loss),
        }
    }

    fn ingest_and_train(&mut self, delivered: Vec<ExperienceSample>) {
        self.delivered_total += delivered.len() as u64;
        self.totals.samples_delivered += delivered.len() as u64;
        for sample in delivered {
            self.replay.push(sample);
        }
        if self.delivered_total >= self.cfg.train_warmup_samples {
            self.replay.sample_into(
                self.cfg.batch_size,
                &mut self.rng_replay,
                &mut self.batch_buf,
            );
            crate::dqn::train_step(
                &mut self.online,
                &self.target,
                &self.batch_buf,
                self.cfg.discount,
                &mut self.opt,
            );
            self.train_steps += 1;
            if self.train_steps.is_multiple_of(self.cfg.target_sync_period) {
                sync_target(&self.online, &mut self.target);
            }
        }
    }

    fn accumulate_metrics(&mut self, outcome: &SlotOutcome) {
        self.totals.arrivals[0] += outcome.arrivals[0] as u64;
        self.totals.arrivals[1] += outcome.arrivals[1] as u64;

        let w = &mut self.window;
        w.reward += outcome.reward;
        w.delivered += outcome.samples_delivered as u64;
        w.s1_rejected += outcome.rejected[0] as u64;
        w.s2_lost += (outcome.rejected[1] + outcome.expired2) as u64;
        for &l in &outcome.served_latencies2 {
            w.lat2_sum += l;
            w.lat2_count += 1;
        }
        if let Some(loss) = outcome.reward_loss {
            w.loss_sum += loss;
            w.loss_count += 1;
        }

        if (outcome.slot + 1).is_multiple_of(SLOTS_PER_WINDOW) {
            let second = outcome.slot / SLOTS_PER_WINDOW;
            let w = std::mem::take(&mut self.window);
            let slot_ms = self.cfg.slot_duration_s * 1e3;
            self.series.seconds.push(SecondRecord {
                second,
                reward: w.reward,
                samples_delivered: w.delivered,
                s1_rejected: w.s1_rejected,
                s2_lost: w.s2_lost,
                s2_mean_latency_ms: if w.lat2_count > 0 {
                    w.lat2_sum as f64 / w.lat2_count as f64 * slot_ms
                } else {
                    0.0
                },
                learnslot_loss_mean: if w.loss_count > 0 {
                    w.loss_sum / w.loss_count as f64
                } else {
                    0.0
                },
                epsilon: self.epsilon_sched.value(self.agent_slots),
                rho: self.rho_sched.rho(second * SLOTS_PER_WINDOW),
            });
        }
    }

    /// Finalizes the run totals from the component counters.
    fn finish(mut self) -> RunOutput {
        let c1 = self.q1.counters();
        let c2 = self.q2.counters();
        self.totals.rejected = [c1.rejected, c2.rejected];
        self.totals.expired2 = c2.expired;
        self.totals.served = [c1.served, c2.served];
        self.totals.final_queue = [self.q1.len() as u64, self.q2.len() as u64];
        self.totals.samples_pending = self.lqueue.len() as u64;
        debug_assert_eq!(self.totals.arrivals[0], c1.accepted + c1.rejected);
        debug_assert_eq!(self.totals.arrivals[1], c2.accepted + c2.rejected);
        RunOutput {
            series: self.series,
            totals: self.totals,
        }
    }
}

/// A finished run: the metric series plus conservation totals.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: MetricsSeries,
    pub totals: RunTotals,
}

/// Runs a full simulation. Deterministic: repeated calls with the same
/// arguments produce identical output. `duration_slots` must be a multiple
/// of the window size.
pub fn run_with_totals(cfg: &SimConfig, mode: Mode, seed: u64, duration_slots: u64) -> RunOutput {
    assert!(
        duration_slots.is_multiple_of(SLOTS_PER_WINDOW),
        "duration must be a whole number of {SLOTS_PER_WINDOW}-slot windows"
    );
    let mut sim = Simulation::new(cfg.clone(), mode, seed);
    for _ in 0..duration_slots {
        sim.step();
    }
    sim.finish()
}

/// Like [`run_with_totals`], returning only the metric series.
pub fn run(cfg: &SimConfig, mode: Mode, seed: u64, duration_slots: u64) -> MetricsSeries {
    run_with_totals(cfg, mode, seed, duration_slots).series
}
