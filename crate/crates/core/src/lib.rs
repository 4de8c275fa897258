//! Probabilistic monthly rainfall-runoff prediction by ensemble post-processing.
//!
//! A two-parameter monthly water-balance model (GR2M) is calibrated by
//! adaptive MCMC. Every retained parameter pair defines a *sister* model whose
//! point predictions are post-processed by a regression error model (linear or
//! quantile). The per-sister predictive quantiles are then averaged
//! probability by probability, and the resulting central prediction intervals
//! are scored with coverage, width and interval score.
//!
//! Module map:
//!
//! * [`timeseries`] daily ingestion, monthly aggregation and period partitioning
//! * [`gr2m`] the water-balance model
//! * [`calibrate`] likelihood, DRAM-style sampler, PSRF and posterior retention
//! * [`regress`] least squares and pinball-loss quantile regression
//! * [`ensemble`] sister generation, error-model variants and quantile averaging
//! * [`evaluate`] interval scores, relative improvements and rankings
//! * [`experiment`] configuration, synthetic catchments, batch runner and reports

pub mod calibrate;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod gr2m;
pub mod regress;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
