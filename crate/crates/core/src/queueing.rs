//! Bounded FIFO slice queues: rejection on overflow, optional deadline
//! expiry, head-first service, and the per-slot QoS reward.
//!
//! Within a slot the owning loop applies (1) expiry, (2) enqueue, (3) serve,
//! in that order. Expiry removes packets strictly older than the deadline,
//! so a packet can still be served at exactly the deadline age and earn full
//! QoS.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceId {
    One,
    Two,
}

/// A queued request; age at slot `t` is `t - created_at`.
#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub slice: SliceId,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueuePolicy {
    RejectOnly,
    RejectAndDeadline { deadline_slots: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueCounters {
    pub accepted: u64,
    pub rejected: u64,
    pub expired: u64,
    pub served: u64,
}

#[derive(Debug, Clone)]
pub struct SliceQueue {
    slice: SliceId,
    capacity: usize,
    policy: QueuePolicy,
    buf: VecDeque<Packet>,
    counters: QueueCounters,
}

impl SliceQueue {
    pub fn new(slice: SliceId, capacity: usize, policy: QueuePolicy) -> Self {
        SliceQueue {
            slice,
            capacity,
            policy,
            buf: VecDeque::with_capacity(capacity.min(4096)),
            counters: QueueCounters::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn counters(&self) -> QueueCounters {
        self.counters
    }

    /// Appends up to the free space; the overflow is rejected outright.
    /// Returns (accepted, rejected).
    pub fn enqueue(&mut self, k_new: usize, now: u64) -> (usize, usize) {
        let accepted = k_new.min(self.capacity - self.buf.len());
        let rejected = k_new - accepted;
        for _ in 0..accepted {
            self.buf.push_back(Packet {
                slice: self.slice,
                created_at: now,
            });
        }
        self.counters.accepted += accepted as u64;
        self.counters.rejected += rejected as u64;
        (accepted, rejected)
    }

    /// Drops every packet whose age exceeds the deadline. Only valid under
    /// the deadline policy.
    pub fn expire(&mut self, now: u64) -> usize {
        let QueuePolicy::RejectAndDeadline { deadline_slots } = self.policy else {
            panic!("expire called on a queue without a deadline policy");
        };
        let mut dropped = 0;
        while let Some(head) = self.buf.front() {
            if now - head.created_at > deadline_slots {
                self.buf.pop_front();
                dropped += 1;
            } else {
                break;
            }
        }
        self.counters.expired += dropped as u64;
        dropped
    }

    /// Serves up to `k` packets from the head; returns their latencies in
    /// service order.
    pub fn serve(&mut self, k: usize, now: u64) -> Vec<u64> {
        let n = k.min(self.buf.len());
        let mut latencies = Vec::with_capacity(n);
        for _ in 0..n {
            let p = self.buf.pop_front().expect("length checked");
            latencies.push(now - p.created_at);
        }
        self.counters.served += n as u64;
        latencies
    }

    /// Packets that must be served this slot to avoid expiry: after expiry
    /// has run, exactly those whose age equals the deadline. Only valid
    /// under the deadline policy.
    pub fn urgent_count(&self, now: u64) -> usize {
        let QueuePolicy::RejectAndDeadline { deadline_slots } = self.policy else {
            panic!("urgent_count called on a queue without a deadline policy");
        };
        self.buf
            .iter()
            .take_while(|p| now - p.created_at >= deadline_slots)
            .count()
    }

    /// Conservation identity: accepted = served + expired + still queued.
    pub fn conservation_holds(&self) -> bool {
        self.counters.accepted
            == self.counters.served + self.counters.expired + self.buf.len() as u64
    }

    #[cfg(test)]
    fn ages(&self, now: u64) -> Vec<u64> {
        self.buf.iter().map(|p| now - p.created_at).collect()
    }

    #[cfg(test)]
    fn push_with_age(&mut self, age: u64, now: u64) {
        self.buf.push_back(Packet {
            slice: self.slice,
            created_at: now - age,
        });
        self.counters.accepted += 1;
    }
}

/// Step QoS: slice 1 scores any finite latency, slice 2 requires the
/// deadline. `None` encodes the infinite latency of a lost packet.
pub fn qos(slice: SliceId, latency_slots: Option<u64>, deadline_slots: u64) -> f64 {
    match (slice, latency_slots) {
        (_, None) => 0.0,
        (SliceId::One, Some(_)) => 1.0,
        (SliceId::Two, Some(l)) => {
            if l <= deadline_slots {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Reward for one slot: the summed QoS of everything served in it.
pub fn slot_reward(served_slice1: &[u64], served_slice2: &[u64], deadline_slots: u64) -> f64 {
    let r1: f64 = served_slice1
        .iter()
        .map(|&l| qos(SliceId::One, Some(l), deadline_slots))
        .sum();
    let r2: f64 = served_slice2
        .iter()
        .map(|&l| qos(SliceId::Two, Some(l), deadline_slots))
        .sum();
    r1 + r2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deadline_queue() -> SliceQueue {
        SliceQueue::new(
            SliceId::Two,
            1500,
            QueuePolicy::RejectAndDeadline { deadline_slots: 70 },
        )
    }

    #[test]
    fn enqueue_basic_and_overflow() {
        let mut q = SliceQueue::new(SliceId::One, 5, QueuePolicy::RejectOnly);
        assert_eq!(q.enqueue(3, 0), (3, 0));
        assert_eq!(q.enqueue(5, 1), (2, 3));
        assert_eq!(q.len(), 5);
        assert_eq!(q.enqueue(5, 2), (0, 5));
        assert_eq!(q.counters().rejected, 8);
    }

    #[test]
    fn expire_is_strictly_greater_than_deadline() {
        let now = 200;
        let mut q = deadline_queue();
        for age in [71, 70, 3] {
            q.push_with_age(age, now);
        }
        assert_eq!(q.expire(now), 1);
        assert_eq!(q.ages(now), vec![70, 3]);

        let mut q = deadline_queue();
        for age in [60, 50] {
            q.push_with_age(age, now);
        }
        assert_eq!(q.expire(now), 0);

        let mut q = deadline_queue();
        for age in [100, 99, 98] {
            q.push_with_age(age, now);
        }
        assert_eq!(q.expire(now), 3);
        assert!(q.is_empty());
    }

    #[test]
    #[should_panic(expected = "deadline policy")]
    fn expire_on_reject_only_is_a_contract_violation() {
        let mut q = SliceQueue::new(SliceId::One, 5, QueuePolicy::RejectOnly);
        q.expire(0);
    }

    #[test]
    fn serve_is_fifo_and_bounded() {
        let now = 100;
        let mut q = deadline_queue();
        for age in [10, 5, 2] {
            q.push_with_age(age, now);
        }
        assert_eq!(q.serve(2, now), vec![10, 5]);
        assert_eq!(q.ages(now), vec![2]);
        assert_eq!(q.serve(7, now), vec![2]);
        assert_eq!(q.serve(7, now), Vec::<u64>::new());
    }

    #[test]
    fn serving_at_exactly_the_deadline_earns_qos() {
        let now = 100;
        let mut q = deadline_queue();
        q.push_with_age(70, now);
        assert_eq!(q.expire(now), 0);
        let latencies = q.serve(1, now);
        assert_eq!(latencies, vec![70]);
        assert_eq!(qos(SliceId::Two, Some(70), 70), 1.0);
    }

    #[test]
    fn qos_values() {
        assert_eq!(qos(SliceId::One, Some(10_000), 70), 1.0);
        assert_eq!(qos(SliceId::Two, Some(70), 70), 1.0);
        assert_eq!(qos(SliceId::Two, Some(71), 70), 0.0);
        assert_eq!(qos(SliceId::One, None, 70), 0.0);
        assert_eq!(qos(SliceId::Two, None, 70), 0.0);
    }

    #[test]
    fn urgent_count_is_packets_at_exactly_the_deadline() {
        let now = 100;
        let mut q = deadline_queue();
        for age in [70, 70, 68] {
            q.push_with_age(age, now);
        }
        assert_eq!(q.urgent_count(now), 2);

        let q2 = deadline_queue();
        assert_eq!(q2.urgent_count(now), 0);

        let mut q3 = deadline_queue();
        for age in [69, 69] {
            q3.push_with_age(age, now);
        }
        assert_eq!(q3.urgent_count(now), 0);
    }

    #[test]
    fn slot_reward_counts_qos() {
        assert_eq!(slot_reward(&[3, 1, 0], &[10, 70], 70), 5.0);
        assert_eq!(slot_reward(&[], &[], 70), 0.0);
        assert_eq!(slot_reward(&[], &[70], 70), 1.0);
    }

    #[test]
    fn conservation_over_random_operations() {
        use crate::rng::{substream, StreamLabel};
        let mut rng = substream(77, StreamLabel::Traffic);
        let mut q = SliceQueue::new(
            SliceId::Two,
            40,
            QueuePolicy::RejectAndDeadline { deadline_slots: 9 },
        );
        let mut offered = 0u64;
        for now in 0..5000u64 {
            q.expire(now);
            let k = rng.next_range(12) as usize;
            offered += k as u64;
            q.enqueue(k, now);
            q.serve(rng.next_range(10) as usize, now);
            assert!(q.conservation_holds());
        }
        let c = q.counters();
        assert_eq!(offered, c.accepted + c.rejected);
        // Monotone aging: head is always the oldest packet.
        assert!(c.served > 0 && c.expired > 0 && c.rejected > 0);
    }
}
