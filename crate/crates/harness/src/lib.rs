//! Experiment driver for the slicesim simulator: mode/seed sweeps with one
//! CSV per run, cross-seed summaries, and the acceptance check suite.

pub mod acceptance;
pub mod cli;
pub mod csv;
pub mod runner;
pub mod summary;
