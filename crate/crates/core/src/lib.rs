//! Episodic tabular reinforcement learning with feedback graphs.

pub mod graph;
pub mod mdp;
pub mod planner;
pub mod props;
pub mod agent;
pub mod domset;
pub mod multitask;
pub mod instances;
pub mod lemmas;
pub mod format;
