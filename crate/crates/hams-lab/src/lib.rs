//! Batch experiment runner around `hams-core`: sampler presets, step-size
//! autotuning to a target acceptance rate, parallel repetitions with
//! per-repetition streams, and CSV/JSON emission for the double-well,
//! stochastic-volatility, log-Gaussian-Cox, Gaussian-validation,
//! theory-table, and matching-report workflows.

pub mod config;
pub mod experiment;
pub mod sampler;
pub mod tables;
pub mod validate;
