//! Property tests of the library's structural invariants.

use proptest::prelude::*;
use slicesim::config::{default_config, parse_config};
use slicesim::dqn::apply_delta;
use slicesim::greedy::{brute_force_allocate, greedy_allocate, GreedyInputs};
use slicesim::learning_plane::{ExperienceSample, LearningQueue, RhoSchedule};
use slicesim::queueing::{QueuePolicy, SliceId, SliceQueue};
use slicesim::rng::{substream, StreamLabel};
use slicesim::traffic::{aggregate_transition_prob, TrafficModel};

fn activity(p01: f64, p10: f64) -> [[f64; 2]; 2] {
    [[1.0 - p01, p01], [p10, 1.0 - p10]]
}

proptest! {
    #[test]
    fn config_text_round_trips(
        n in 1usize..64,
        q in 1usize..5000,
        rho_f in 0.0f64..0.5,
        spread in 0.0f64..0.5,
        sigma in 1e-6f64..1e-2,
        ell in 1usize..8,
    ) {
        let mut cfg = default_config();
        cfg.n_resources = n;
        cfg.queue_capacity = q;
        cfg.pressure_threshold = q.saturating_sub(100);
        cfg.rho_f = rho_f;
        cfg.rho_0 = rho_f + spread;
        cfg.sigma = sigma;
        cfg.fragments_per_sample = ell;
        prop_assume!(cfg.validate().is_ok());
        let reparsed = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(cfg, reparsed);
    }

    #[test]
    fn aggregate_transition_rows_are_stochastic(
        users in 0usize..=20,
        p01 in 0.0f64..=1.0,
        p10 in 0.0f64..=1.0,
    ) {
        let model = TrafficModel {
            users,
            rate_bytes_per_s: 512_000.0,
            activity: activity(p01, p10),
            packets_per_slot: 1,
        };
        for u in 0..=users {
            let total: f64 = (0..=users)
                .map(|v| aggregate_transition_prob(u, v, &model))
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "row {} sums to {}", u, total);
        }
    }

    #[test]
    fn queue_conservation_under_arbitrary_operations(
        capacity in 1usize..64,
        deadline in 1u64..40,
        ops in proptest::collection::vec((0usize..12, 0usize..12), 1..400),
    ) {
        let mut q = SliceQueue::new(
            SliceId::Two,
            capacity,
            QueuePolicy::RejectAndDeadline { deadline_slots: deadline },
        );
        let mut offered = 0u64;
        for (now, &(arrivals, service)) in ops.iter().enumerate() {
            let now = now as u64;
            q.expire(now);
            offered += arrivals as u64;
            q.enqueue(arrivals, now);
            q.serve(service, now);
            prop_assert!(q.len() <= capacity);
            prop_assert!(q.conservation_holds());
        }
        let c = q.counters();
        prop_assert_eq!(offered, c.accepted + c.rejected);
    }

    #[test]
    fn greedy_matches_brute_force(
        n in 1usize..=6,
        chi in 0usize..25,
        q1 in 0usize..60,
        q2 in 0usize..30,
        urgent_frac in 0.0f64..=1.0,
        backlog in 0usize..40,
    ) {
        let inputs = GreedyInputs {
            q1,
            q2,
            urgent2: (q2 as f64 * urgent_frac) as usize,
            backlog_fragments: backlog,
            n_resources: n,
            pressure_threshold: chi,
            e_capacity: 1500,
        };
        let fast = greedy_allocate(&inputs);
        let oracle = brute_force_allocate(&inputs);
        prop_assert_eq!(fast, oracle);
        prop_assert!(fast.total() <= n);
        prop_assert!(fast.learning <= backlog);
    }

    #[test]
    fn delta_walks_preserve_the_allocation_simplex(
        n_data in 1usize..32,
        start_frac in 0.0f64..=1.0,
        actions in proptest::collection::vec(0usize..3, 1..200),
    ) {
        let a1 = ((n_data as f64) * start_frac) as usize;
        let mut alloc = (a1.min(n_data), n_data - a1.min(n_data));
        for &a in &actions {
            alloc = apply_delta(alloc, a, n_data);
            prop_assert_eq!(alloc.0 + alloc.1, n_data);
        }
    }

    #[test]
    fn rho_is_monotone_and_bounded(
        rho_f in 0.0f64..0.5,
        spread in 0.0f64..0.5,
        sigma in 1e-6f64..1e-2,
        pace in 1u64..5000,
    ) {
        let sched = RhoSchedule { rho_0: rho_f + spread, rho_f, sigma, pace_slots: pace };
        let mut prev = f64::INFINITY;
        for t in (0..2_000_000u64).step_by(9973) {
            let r = sched.rho(t);
            prop_assert!(r <= prev);
            prop_assert!(r >= sched.rho_f && r <= sched.rho_0);
            prev = r;
        }
    }

    #[test]
    fn fragment_conservation_under_random_transport(
        ell in 1usize..6,
        capacity in 1usize..32,
        ops in proptest::collection::vec((any::<bool>(), 0usize..10), 1..300),
        seed in 0u64..1000,
    ) {
        let mut q = LearningQueue::new(capacity, ell);
        let mut rng = substream(seed, StreamLabel::Rejection);
        let sample = ExperienceSample {
            observation: slicesim::dqn::Observation([0.5; slicesim::dqn::OBS_DIM]),
            action: 0,
            reward: 0.0,
            next_observation: slicesim::dqn::Observation([0.5; slicesim::dqn::OBS_DIM]),
        };
        let mut consumed = 0u64;
        for &(offer, k) in &ops {
            if offer {
                q.offer(sample, &mut rng);
            }
            let (_, sent) = q.transmit(k);
            consumed += sent as u64;
            prop_assert!(q.len() <= capacity);
            prop_assert!(q.conservation_holds());
        }
        let c = q.counters();
        prop_assert_eq!(
            c.offered * ell as u64,
            c.early_rejected * ell as u64 + consumed + q.backlog_fragments() as u64
        );
    }
}
