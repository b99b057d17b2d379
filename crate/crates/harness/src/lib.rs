//! Experiment configs, seeded runs and sweeps on top of `fgrl-core`.

pub mod config;
pub mod experiment;
pub mod instance;
pub mod sweep;
