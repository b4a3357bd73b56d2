//! Sim-to-real learning pipeline: rewards, randomization, policies and training.

pub mod cem;
pub mod env;
pub mod noise;
pub mod policy;
pub mod reward;
pub mod robustness;
pub mod task;
