//! The acceptance suite: eight checks covering analytic anchors, the
//! traffic-chain and allocator oracles, the learning-slot schedule and
//! delivery ceiling, desk-scale experiment trends, the learning-slot loss
//! distribution, learner numerics, and determinism plus conservation.
//!
//! Checks A4, A5, A6, and A8 share one experiment batch: three seeds by
//! three modes at 600 simulated seconds each, plus one repeated run for the
//! bit-identity check. Budget roughly 10-25 minutes at two workers.

use crate::csv::csv_string;
use crate::runner::execute_runs;
use crate::summary::RunRecord;
use slicesim::config::default_config;
use slicesim::dqn::{
    self, action_value_loss, action_value_loss_gradient, apply_delta, Adam, Observation, QNetwork,
};
use slicesim::greedy::{brute_force_allocate, greedy_allocate, shortfall_terms, GreedyInputs};
use slicesim::learning_plane::{ExperienceSample, RhoSchedule};
use slicesim::metrics::RunTotals;
use slicesim::rng::{substream, RngStream, StreamLabel};
use slicesim::sim::Mode;
use slicesim::traffic::{
    aggregate_transition_prob, capacity, expected_traffic, TrafficModel, TrafficState,
};

pub const SEEDS: [u64; 3] = [1, 2, 3];
pub const DURATION_S: u64 = 600;
pub const TAIL_S: usize = 100;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: &'static str, passed: bool, detail: String) -> Self {
        CriterionResult { id, passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} - {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// The shared experiment batch for A4/A5/A6/A8.
pub struct ExperimentBatch {
    pub runs: Vec<(RunRecord, RunTotals)>,
    /// CSV text of the batch's (dynamic, first seed) run and of an
    /// independent repeat of the same run.
    pub dynamic_csv: String,
    pub dynamic_csv_repeat: String,
}

impl ExperimentBatch {
    fn runs_of(&self, mode: Mode) -> Vec<&(RunRecord, RunTotals)> {
        self.runs.iter().filter(|(r, _)| r.mode == mode).collect()
    }
}

/// Runs the full batch: dynamic, out-of-band, and static:2 over the
/// acceptance seeds, plus one repeat of (dynamic, seed 1).
pub fn run_experiment_batch(jobs: usize) -> ExperimentBatch {
    let cfg = default_config();
    let modes = [Mode::Dynamic, Mode::OutOfBand, Mode::Static { reserved: 2 }];
    let runs = execute_runs(&cfg, &modes, &SEEDS, DURATION_S, jobs);
    let repeat = execute_runs(&cfg, &[Mode::Dynamic], &SEEDS[..1], DURATION_S, 1);
    let dynamic_csv = csv_string(
        &runs
            .iter()
            .find(|(r, _)| r.mode == Mode::Dynamic && r.seed == SEEDS[0])
            .expect("batch contains the dynamic run")
            .0
            .series,
    );
    let dynamic_csv_repeat = csv_string(&repeat[0].0.series);
    ExperimentBatch {
        runs,
        dynamic_csv,
        dynamic_csv_repeat,
    }
}

/// A1: closed-form traffic and capacity anchors.
pub fn check_a1() -> CriterionResult {
    let cfg = default_config();
    let g1 = expected_traffic(&TrafficModel::slice1(&cfg)).expect("non-degenerate");
    let g2 = expected_traffic(&TrafficModel::slice2(&cfg)).expect("non-degenerate");
    let cap = capacity(&cfg);
    let ok = (g1 - 2.88e6).abs() <= 0.01e6 && (g2 - 4.35e6).abs() <= 0.01e6 && cap == 7.68e6;
    CriterionResult::new(
        "A1",
        ok,
        format!(
            "expected traffic {:.4}/{:.4} MB/s (want 2.88/4.35 +-0.01), capacity {:.2} MB/s (want 7.68 exact)",
            g1 / 1e6,
            g2 / 1e6,
            cap / 1e6
        ),
    )
}

/// A2: aggregate-chain rows are stochastic and the closed form matches a
/// per-user Monte-Carlo simulation.
pub fn check_a2() -> CriterionResult {
    let mut rng = substream(1201, StreamLabel::Traffic);
    let mut worst_row_gap: f64 = 0.0;
    for _ in 0..100 {
        let p01 = rng.next_f64();
        let p10 = rng.next_f64();
        let users = 1 + rng.next_range(20) as usize;
        let model = TrafficModel {
            users,
            rate_bytes_per_s: 512_000.0,
            activity: [[1.0 - p01, p01], [p10, 1.0 - p10]],
            packets_per_slot: 1,
        };
        for u in 0..=users {
            let total: f64 = (0..=users)
                .map(|v| aggregate_transition_prob(u, v, &model))
                .sum();
            worst_row_gap = worst_row_gap.max((total - 1.0).abs());
        }
    }
    let rows_ok = worst_row_gap < 1e-9;

    let cfg = default_config();
    let mut mc_ok = true;
    let mut worst_z: f64 = 0.0;
    for activity in [cfg.slice1_activity, cfg.slice2_activity] {
        let model = TrafficModel {
            users: 4,
            rate_bytes_per_s: 512_000.0,
            activity,
            packets_per_slot: 1,
        };
        let mut rng = substream(1202, StreamLabel::Traffic);
        let mut state = TrafficState::stationary(&model, &mut rng).expect("non-degenerate");
        let mut counts = [[0u64; 5]; 5];
        let mut u = state.active_count();
        for _ in 0..1_000_000 {
            slicesim::traffic::step(&mut state, &model, &mut rng);
            let v = state.active_count();
            counts[u][v] += 1;
            u = v;
        }
        for (u, row) in counts.iter().enumerate() {
            let row_total: u64 = row.iter().sum();
            if row_total < 1000 {
                continue;
            }
            for (v, &count) in row.iter().enumerate() {
                let p = aggregate_transition_prob(u, v, &model);
                let emp = count as f64 / row_total as f64;
                let sigma = (p * (1.0 - p) / row_total as f64).sqrt().max(1e-12);
                let z = (emp - p).abs() / sigma;
                worst_z = worst_z.max(z);
                if z > 3.0 {
                    mc_ok = false;
                }
            }
        }
    }
    CriterionResult::new(
        "A2",
        rows_ok && mc_ok,
        format!(
            "worst row-sum gap {worst_row_gap:.2e} (want < 1e-9), worst Monte-Carlo z {worst_z:.2} (want <= 3)"
        ),
    )
}

fn random_allocator_inputs(rng: &mut RngStream) -> GreedyInputs {
    let n = 1 + rng.next_range(6) as usize;
    let chi = rng.next_range(25) as usize;
    let q2 = rng.next_range(30) as usize;
    GreedyInputs {
        q1: rng.next_range(60) as usize,
        q2,
        urgent2: rng.next_range(q2 as u64 + 1) as usize,
        backlog_fragments: rng.next_range(40) as usize,
        n_resources: n,
        pressure_threshold: chi,
        e_capacity: 1500,
    }
}

/// A3: the marginal-gain solver matches the brute-force oracle exactly and
/// never starves satisfiable slice demand.
pub fn check_a3() -> CriterionResult {
    let mut rng = substream(1301, StreamLabel::Traffic);
    let mut objective_matches = 0usize;
    let mut vector_matches = 0usize;
    let mut priority_ok = true;
    const INSTANCES: usize = 10_000;
    for _ in 0..INSTANCES {
        let inputs = random_allocator_inputs(&mut rng);
        let fast = greedy_allocate(&inputs);
        let oracle = brute_force_allocate(&inputs);
        let (f1, f2, fs) = shortfall_terms(&inputs, &fast);
        let (o1, o2, os) = shortfall_terms(&inputs, &oracle);
        let e = inputs.e_capacity as f64;
        if (f1 + f2) / 2.0 + fs / e == (o1 + o2) / 2.0 + os / e {
            objective_matches += 1;
        }
        if fast == oracle {
            vector_matches += 1;
        }
        let d1 = inputs
            .q1
            .saturating_sub(inputs.pressure_threshold)
            .min(inputs.n_resources);
        let d2 = inputs.urgent2.min(inputs.n_resources);
        if d1 + d2 <= inputs.n_resources && (f1, f2) != (0.0, 0.0) {
            priority_ok = false;
        }
    }
    let ok = objective_matches == INSTANCES && vector_matches == INSTANCES && priority_ok;
    CriterionResult::new(
        "A3",
        ok,
        format!(
            "{objective_matches}/{INSTANCES} objective matches, {vector_matches}/{INSTANCES} vector matches, priority property {}",
            if priority_ok { "holds" } else { "violated" }
        ),
    )
}

/// A4: the schedule floor lands exactly at slot 238000 and post-convergence
/// delivery throughput stays within [25, 50] samples/s in every disjoint
/// 100-second window from 300 s on.
pub fn check_a4(batch: &ExperimentBatch) -> CriterionResult {
    let sched = RhoSchedule::from_config(&default_config());
    let schedule_ok = sched.rho(238_000) == 0.01
        && sched.rho(237_999) > 0.01
        && sched.rho(1_000_000) == 0.01;

    // rho reaches its floor at 238 s; the first aligned window afterwards
    // starts at 300 s.
    let mut windows: Vec<f64> = Vec::new();
    for (record, _) in batch.runs_of(Mode::Dynamic).into_iter() {
        for chunk in record.series.seconds[300..].chunks(100) {
            let per_s =
                chunk.iter().map(|s| s.samples_delivered).sum::<u64>() as f64 / chunk.len() as f64;
            windows.push(per_s);
        }
    }
    let lo = windows.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = windows.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let windows_ok = windows.iter().all(|&w| (25.0..=50.0).contains(&w));
    CriterionResult::new(
        "A4",
        schedule_ok && windows_ok,
        format!(
            "rho floor at 238000 {}, delivered/s over {} post-convergence windows in [{lo:.2}, {hi:.2}] (want within [25, 50])",
            if schedule_ok { "exact" } else { "WRONG" },
            windows.len()
        ),
    )
}

/// A5: desk-scale trend checks of the three modes.
pub fn check_a5(batch: &ExperimentBatch) -> CriterionResult {
    let tail_reward = |mode: Mode| -> Vec<f64> {
        batch
            .runs_of(mode)
            .iter()
            .map(|(r, _)| r.series.tail_mean(TAIL_S, |s| s.reward))
            .collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let dyn_tails = tail_reward(Mode::Dynamic);
    let oob_tails = tail_reward(Mode::OutOfBand);
    let static_tails = tail_reward(Mode::Static { reserved: 2 });
    let near_ideal = mean(&dyn_tails) >= 0.95 * mean(&oob_tails);

    let paired_wins = dyn_tails
        .iter()
        .zip(static_tails.iter())
        .filter(|(d, s)| d >= s)
        .count();
    let beats_static = paired_wins >= 2;

    let tail_latency = |mode: Mode| -> f64 {
        let v: Vec<f64> = batch
            .runs_of(mode)
            .iter()
            .map(|(r, _)| r.series.tail_mean(TAIL_S, |s| s.s2_mean_latency_ms))
            .collect();
        mean(&v)
    };
    let dyn_latency = tail_latency(Mode::Dynamic);
    let static_latency = tail_latency(Mode::Static { reserved: 2 });
    let latency_ok = dyn_latency <= 10.0 && static_latency >= 40.0;

    CriterionResult::new(
        "A5",
        near_ideal && beats_static && latency_ok,
        format!(
            "tail reward dynamic {:.0} vs 0.95*oob {:.0} ({}), beats static:2 in {paired_wins}/3 seeds, \
             slice-2 tail latency dynamic {dyn_latency:.2} ms (want <= 10) static {static_latency:.2} ms (want >= 40)",
            mean(&dyn_tails),
            0.95 * mean(&oob_tails),
            if near_ideal { "ok" } else { "LOW" }
        ),
    )
}

/// A6: learning-slot reward-loss distribution of each dynamic run.
pub fn check_a6(batch: &ExperimentBatch) -> CriterionResult {
    let mut ok = true;
    let mut details = Vec::new();
    for (record, totals) in batch.runs_of(Mode::Dynamic) {
        let zero = totals.learning_loss_zero as f64 / totals.learning_slots as f64;
        let le_tenth = totals.learning_loss_le_tenth as f64 / totals.learning_slots as f64;
        if zero < 0.30 || le_tenth < 0.70 {
            ok = false;
        }
        details.push(format!(
            "seed {}: zero {:.1}% (want >= 30%), <= 0.1 {:.1}% (want >= 70%)",
            record.seed,
            zero * 100.0,
            le_tenth * 100.0
        ));
    }
    CriterionResult::new("A6", ok, details.join("; "))
}

/// A7: learner numerics: finite-difference gradients, frozen-target
/// temporal-difference convergence, delta-action validity.
pub fn check_a7() -> CriterionResult {
    let mut rng = substream(1701, StreamLabel::WeightInit);
    let mut worst_rel: f64 = 0.0;
    let mut grad_ok = true;
    for probe in 0..100 {
        let net = QNetwork::agent_default(&mut rng);
        let mut obs = [0.0; dqn::OBS_DIM];
        obs.iter_mut().for_each(|v| *v = rng.next_f64());
        let obs = Observation(obs);
        let action = (probe % dqn::ACTION_COUNT as u64) as usize;
        let target = rng.next_uniform(-1.0, 1.0);
        let grads = action_value_loss_gradient(&net, &obs, action, target);
        let idx = rng.next_range(net.param_count() as u64) as usize;
        let h = 1e-5;
        let mut plus = net.clone();
        plus.nudge_param(idx, h);
        let mut minus = net.clone();
        minus.nudge_param(idx, -h);
        let numeric = (action_value_loss(&plus, &obs, action, target)
            - action_value_loss(&minus, &obs, action, target))
            / (2.0 * h);
        let analytic = grads.get(idx);
        let gap = (analytic - numeric).abs();
        if gap > 1e-8 {
            let rel = gap / analytic.abs().max(numeric.abs());
            worst_rel = worst_rel.max(rel);
            if rel >= 1e-4 {
                grad_ok = false;
            }
        }
    }

    // Frozen-target fixed point on a single repeated transition.
    let mut online = QNetwork::agent_default(&mut rng);
    let frozen = QNetwork::agent_default(&mut rng);
    let mut obs = [0.0; dqn::OBS_DIM];
    obs.iter_mut().for_each(|v| *v = rng.next_f64());
    let mut next = [0.0; dqn::OBS_DIM];
    next.iter_mut().for_each(|v| *v = rng.next_f64());
    let (obs, next) = (Observation(obs), Observation(next));
    let gamma = 0.95;
    let reward = 0.4;
    let y = reward
        + gamma
            * frozen
                .forward(&next.0)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
    let batch = vec![
        ExperienceSample {
            observation: obs,
            action: 1,
            reward,
            next_observation: next,
        };
        8
    ];
    let mut opt = Adam::new(&online, 1e-3, 0.9, 0.999, 1e-8);
    for _ in 0..20_000 {
        dqn::train_step(&mut online, &frozen, &batch, gamma, &mut opt);
    }
    let q = online.forward(&obs.0)[1];
    let td_gap = (q - y).abs();
    let td_ok = td_gap < 1e-3;

    // Clamped delta walk never escapes the simplex.
    let mut walk_ok = true;
    let n_data = 15;
    let mut alloc = (8usize, 7usize);
    for _ in 0..1_000_000 {
        alloc = apply_delta(alloc, rng.next_range(3) as usize, n_data);
        if alloc.0 + alloc.1 != n_data {
            walk_ok = false;
            break;
        }
    }

    CriterionResult::new(
        "A7",
        grad_ok && td_ok && walk_ok,
        format!(
            "worst gradient rel err {worst_rel:.2e} (want < 1e-4), frozen-target gap {td_gap:.2e} (want < 1e-3), delta walk {}",
            if walk_ok { "valid" } else { "INVALID" }
        ),
    )
}

/// A8: bit-identical repeated runs and exact conservation for every batch run.
pub fn check_a8(batch: &ExperimentBatch) -> CriterionResult {
    let identical = batch.dynamic_csv == batch.dynamic_csv_repeat;
    let mut conservation = true;
    for (record, totals) in &batch.runs {
        if !totals.conservation_ok() {
            conservation = false;
            eprintln!(
                "conservation violated for {} seed {}: {totals:?}",
                record.mode, record.seed
            );
        }
    }
    CriterionResult::new(
        "A8",
        identical && conservation,
        format!(
            "repeat run CSV {} ({} bytes), conservation {} for {} runs",
            if identical { "bit-identical" } else { "DIFFERS" },
            batch.dynamic_csv.len(),
            if conservation { "exact" } else { "VIOLATED" },
            batch.runs.len()
        ),
    )
}

/// Runs the full acceptance suite. The fast checks come first; the
/// experiment batch then feeds A4/A5/A6/A8.
pub fn run_acceptance(jobs: usize, mut progress: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut results = Vec::new();
    let mut push = |r: CriterionResult, progress: &mut dyn FnMut(&CriterionResult)| {
        progress(&r);
        results.push(r);
    };
    push(check_a1(), &mut progress);
    push(check_a2(), &mut progress);
    push(check_a3(), &mut progress);
    push(check_a7(), &mut progress);
    let batch = run_experiment_batch(jobs);
    push(check_a4(&batch), &mut progress);
    push(check_a5(&batch), &mut progress);
    push(check_a6(&batch), &mut progress);
    push(check_a8(&batch), &mut progress);
    let mut ordered = std::mem::take(&mut results);
    ordered.sort_by_key(|r| r.id);
    ordered
}
