//! Learning-slot resource split: shortfall penalties for both slices and the
//! learning backlog, the weighted integer program over allocation vectors,
//! a closed-form marginal-gain solver, and a brute-force oracle.
//!
//! The objective is (R1 + R2) / M + S / E with M = 2 slices and E the
//! learning queue capacity. Each term is a shortfall penalty min(0, z - d)
//! against its demand d, so per-resource marginal gains are 1/2 for unmet
//! slice demand, 1/E for unmet learning demand, and 0 afterwards. The solver
//! fills demands in that order and applies a fixed tie-break for the
//! leftover resources: residual queued packets (slice 2 first), then idle.

/// A split of one slot's resources. Components sum to at most N; whatever
/// is not allocated idles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocationVector {
    pub slice1: usize,
    pub slice2: usize,
    pub learning: usize,
}

impl AllocationVector {
    pub fn total(&self) -> usize {
        self.slice1 + self.slice2 + self.learning
    }

    pub fn idle(&self, n_resources: usize) -> usize {
        n_resources - self.total()
    }
}

/// Everything the learning-slot allocator can see.
#[derive(Debug, Clone, Copy)]
pub struct GreedyInputs {
    /// Slice-1 queue length.
    pub q1: usize,
    /// Slice-2 queue length.
    pub q2: usize,
    /// Slice-2 packets at exactly the deadline age.
    pub urgent2: usize,
    /// Learning backlog in pending uplink fragments.
    pub backlog_fragments: usize,
    /// Resources available this slot.
    pub n_resources: usize,
    /// chi_1: slice-1 queue length above which it earns greedy service.
    pub pressure_threshold: usize,
    /// E: learning queue capacity, the learning term's objective weight.
    pub e_capacity: usize,
}

const SLICES: i64 = 2; // M

impl GreedyInputs {
    fn check(&self) {
        debug_assert!(self.urgent2 <= self.q2, "urgent packets are queued packets");
        assert!(
            self.e_capacity as i64 > SLICES,
            "objective weights require E > M"
        );
    }

    /// Slice-1 demand: queue overflow above the pressure threshold, capped at N.
    fn demand1(&self) -> usize {
        self.q1
            .saturating_sub(self.pressure_threshold)
            .min(self.n_resources)
    }

    /// Slice-2 demand: packets that expire unless served now, capped at N.
    fn demand2(&self) -> usize {
        self.urgent2.min(self.n_resources)
    }

    /// Learning demand: pending fragments, capped at N.
    fn demand_learning(&self) -> usize {
        self.backlog_fragments.min(self.n_resources)
    }
}

/// The three estimated-reward terms (R1, R2, S) for an allocation, each a
/// nonpositive shortfall against its demand.
pub fn shortfall_terms(inputs: &GreedyInputs, z: &AllocationVector) -> (f64, f64, f64) {
    let (r1, r2, s) = shortfall_terms_exact(inputs, z);
    (r1 as f64, r2 as f64, s as f64)
}

fn shortfall_terms_exact(inputs: &GreedyInputs, z: &AllocationVector) -> (i64, i64, i64) {
    let r1 = 0.min(z.slice1 as i64 - inputs.demand1() as i64);
    let r2 = 0.min(z.slice2 as i64 - inputs.demand2() as i64);
    let s = 0.min(z.learning as i64 - inputs.demand_learning() as i64);
    (r1, r2, s)
}

/// The objective scaled by M * E so comparisons are exact integer
/// arithmetic: E * (R1 + R2) + M * S.
fn scaled_objective(inputs: &GreedyInputs, z: &AllocationVector) -> i64 {
    let (r1, r2, s) = shortfall_terms_exact(inputs, z);
    inputs.e_capacity as i64 * (r1 + r2) + SLICES * s
}

/// Tie-break key, maximized lexicographically among objective maximizers:
/// serve as many real slice-2 packets as possible, then slice-1 packets,
/// then leave the rest idle (smallest total allocation).
fn tie_break_key(inputs: &GreedyInputs, z: &AllocationVector) -> (usize, usize, i64) {
    (
        z.slice2.min(inputs.q2),
        z.slice1.min(inputs.q1),
        -(z.total() as i64),
    )
}

/// Solves the integer program by marginal gains: slice-2 urgency, then
/// slice-1 overflow, then learning backlog, then leftovers to residual
/// queued packets (slice 2 first), then idle.
pub fn greedy_allocate(inputs: &GreedyInputs) -> AllocationVector {
    inputs.check();
    let n = inputs.n_resources;
    let slice2 = inputs.demand2();
    let slice1 = inputs.demand1().min(n - slice2);
    let learning = inputs.demand_learning().min(n - slice1 - slice2);
    let mut z = AllocationVector {
        slice1,
        slice2,
        learning,
    };
    let mut leftover = n - z.total();
    let extra2 = (inputs.q2 - z.slice2).min(leftover);
    z.slice2 += extra2;
    leftover -= extra2;
    let extra1 = (inputs.q1 - z.slice1).min(leftover);
    z.slice1 += extra1;
    z
}

/// Exhaustive argmax over every allocation with total <= N, under the same
/// objective and tie-break as `greedy_allocate`. Test oracle only; the
/// enumeration is cubic in N.
pub fn brute_force_allocate(inputs: &GreedyInputs) -> AllocationVector {
    inputs.check();
    let n = inputs.n_resources;
    assert!(n <= 12, "brute force enumeration is bounded at N = 12");
    let mut best: Option<(i64, (usize, usize, i64), AllocationVector)> = None;
    for slice1 in 0..=n {
        for slice2 in 0..=n - slice1 {
            for learning in 0..=n - slice1 - slice2 {
                let z = AllocationVector {
                    slice1,
                    slice2,
                    learning,
                };
                let key = (scaled_objective(inputs, &z), tie_break_key(inputs, &z));
                match &best {
                    Some((obj, tie, _)) if (key.0, key.1) <= (*obj, *tie) => {}
                    _ => best = Some((key.0, key.1, z)),
                }
            }
        }
    }
    best.expect("candidate set is nonempty").2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamLabel};

    fn inputs(q1: usize, q2: usize, urgent2: usize, backlog: usize) -> GreedyInputs {
        GreedyInputs {
            q1,
            q2,
            urgent2,
            backlog_fragments: backlog,
            n_resources: 15,
            pressure_threshold: 1400,
            e_capacity: 1500,
        }
    }

    #[test]
    fn shortfall_examples() {
        // No demand anywhere.
        let i = inputs(1400, 0, 0, 0);
        let z = AllocationVector {
            slice1: 5,
            slice2: 5,
            learning: 5,
        };
        assert_eq!(shortfall_terms(&i, &z), (0.0, 0.0, 0.0));

        // q1 = 1405 gives slice-1 demand 5; z1 = 3 is 2 short.
        let i = inputs(1405, 0, 0, 0);
        let z = AllocationVector {
            slice1: 3,
            slice2: 0,
            learning: 0,
        };
        assert_eq!(shortfall_terms(&i, &z).0, -2.0);

        // Demand exactly met.
        let i = inputs(0, 10, 4, 0);
        let z = AllocationVector {
            slice1: 0,
            slice2: 4,
            learning: 0,
        };
        assert_eq!(shortfall_terms(&i, &z).1, 0.0);
    }

    #[test]
    fn greedy_reference_cases() {
        // All three demands active and compatible.
        assert_eq!(
            greedy_allocate(&inputs(1405, 4, 4, 30)),
            AllocationVector {
                slice1: 5,
                slice2: 4,
                learning: 6
            }
        );
        // No demand at all: everything idles.
        let z = greedy_allocate(&inputs(0, 0, 0, 0));
        assert_eq!(z, AllocationVector { slice1: 0, slice2: 0, learning: 0 });
        assert_eq!(z.idle(15), 15);
        // Urgent slice-2 demand saturates the slot.
        assert_eq!(
            greedy_allocate(&inputs(1500, 20, 20, 9)),
            AllocationVector {
                slice1: 0,
                slice2: 15,
                learning: 0
            }
        );
    }

    #[test]
    fn leftovers_serve_residual_queues_slice2_first() {
        // Demands: d1 = 0 (below threshold), d2 = 1, learning 3. Of the 11
        // leftovers, 5 finish the residual slice-2 queue and 6 go to slice 1.
        let z = greedy_allocate(&inputs(40, 6, 1, 3));
        assert_eq!(
            z,
            AllocationVector {
                slice1: 6,
                slice2: 6,
                learning: 3
            }
        );
        assert_eq!(z.idle(15), 0);
    }

    #[test]
    fn brute_force_single_resource_cases() {
        let mut i = inputs(0, 1, 1, 3);
        i.n_resources = 1;
        // Slice weight 1/2 beats learning weight 1/E.
        assert_eq!(
            brute_force_allocate(&i),
            AllocationVector {
                slice1: 0,
                slice2: 1,
                learning: 0
            }
        );
        let mut i = inputs(0, 0, 0, 3);
        i.n_resources = 1;
        // Only learning has positive marginal gain.
        assert_eq!(
            brute_force_allocate(&i),
            AllocationVector {
                slice1: 0,
                slice2: 0,
                learning: 1
            }
        );
    }

    #[test]
    #[should_panic(expected = "bounded at N = 12")]
    fn brute_force_rejects_large_n() {
        brute_force_allocate(&inputs(0, 0, 0, 0));
    }

    fn random_inputs(rng: &mut crate::rng::RngStream) -> GreedyInputs {
        let n = 1 + rng.next_range(6) as usize;
        let chi = rng.next_range(20) as usize;
        let q1 = rng.next_range(40) as usize;
        let q2 = rng.next_range(25) as usize;
        let urgent2 = rng.next_range(q2 as u64 + 1) as usize;
        let backlog = rng.next_range(30) as usize;
        GreedyInputs {
            q1,
            q2,
            urgent2,
            backlog_fragments: backlog,
            n_resources: n,
            pressure_threshold: chi,
            e_capacity: 1500,
        }
    }

    #[test]
    fn greedy_matches_brute_force_on_random_instances() {
        let mut rng = substream(2024, StreamLabel::Traffic);
        for _ in 0..1000 {
            let i = random_inputs(&mut rng);
            let g = greedy_allocate(&i);
            let b = brute_force_allocate(&i);
            assert_eq!(
                scaled_objective(&i, &g),
                scaled_objective(&i, &b),
                "objective mismatch on {i:?}"
            );
            assert_eq!(g, b, "tie-break mismatch on {i:?}");
        }
    }

    #[test]
    fn learning_allocation_monotone_in_backlog() {
        let mut rng = substream(55, StreamLabel::Traffic);
        for _ in 0..500 {
            let mut i = random_inputs(&mut rng);
            let z_small = greedy_allocate(&i);
            i.backlog_fragments += 1 + rng.next_range(5) as usize;
            let z_big = greedy_allocate(&i);
            assert!(z_big.learning >= z_small.learning);
        }
    }

    #[test]
    fn urgent_demand_never_starved() {
        let mut rng = substream(56, StreamLabel::Traffic);
        for _ in 0..1000 {
            let i = random_inputs(&mut rng);
            let z = greedy_allocate(&i);
            let d1 = i.q1.saturating_sub(i.pressure_threshold).min(i.n_resources);
            let d2 = i.urgent2.min(i.n_resources);
            if d1 + d2 <= i.n_resources {
                let (r1, r2, _) = shortfall_terms(&i, &z);
                assert_eq!((r1, r2), (0.0, 0.0), "starved demand on {i:?}");
            }
            assert!(z.total() <= i.n_resources);
            assert!(z.learning <= i.backlog_fragments);
        }
    }
}
