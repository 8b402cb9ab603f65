//! Deterministic slotted-time simulator of a two-slice radio link in which
//! the scheduling agent's own training traffic competes for the resource
//! blocks it allocates.
//!
//! The crate is organized around the slot loop in [`sim`]:
//!
//! - [`config`]: parameter set, defaults, and the text override format.
//! - [`rng`]: labeled deterministic substreams of the master seed.
//! - [`traffic`]: per-user on-off sources and their aggregate chain.
//! - [`queueing`]: bounded FIFO slice queues, deadlines, QoS reward.
//! - [`greedy`]: the learning-slot resource split and its oracle.
//! - [`learning_plane`]: learning-slot schedule and sample transport.
//! - [`dqn`]: the value network, replay, and training.
//! - [`sim`]: the slot loop, benchmark modes, and per-run metrics.

pub mod config;
pub mod dqn;
pub mod greedy;
pub mod learning_plane;
pub mod queueing;
pub mod rng;
pub mod sim;
pub mod traffic;
pub mod metrics;
