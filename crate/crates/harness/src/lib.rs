//! Experiment harness for the `dualavg` solvers: configs, seeded trials,
//! trace files, rate fits, coverage checks and plots.

pub mod analysis;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod runner;
