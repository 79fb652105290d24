//! Uncertainty-aware scheduling simulator for batched language-model
//! inference.
//!
//! The pipeline has three stages:
//!
//! 1. [`textfeat`] turns raw utterances into a six-dimensional vector of
//!    linguistic-uncertainty intensities using deterministic, lexicon-driven
//!    rules.
//! 2. [`estimator`] maps that vector to a predicted output length (the
//!    uncertainty score) with either a fitted linear rule or a small MLP
//!    regressor, and derives the offload threshold from a quantile of the
//!    training-set predictions.
//! 3. [`sched`] + [`sim`] run the online phase: priority assignment,
//!    dynamic batch consolidation, CPU offloading, and a deterministic
//!    discrete-event executor with a parametric latency model standing in
//!    for real model inference.
//!
//! [`workload`] synthesizes traces and Poisson arrival plans, and
//! [`metrics`] computes the evaluation outputs (response stats, miss
//! ratios, throughput, policy comparisons).

pub mod cli;
pub mod estimator;
pub mod metrics;
pub mod sched;
pub mod sim;
pub mod textfeat;
pub mod util;
pub mod workload;
