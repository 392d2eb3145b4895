//! Bayesian Cox proportional hazards model with a gamma-process baseline
//! hazard and graph-structured spike-and-slab variable selection.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod io;
pub mod likelihood;
pub mod priors;
pub mod sampler;
pub mod simulate;
pub mod study;
pub mod summary;

pub use data::{build_partition, interval_sets, IntervalSets, SurvivalDataset, TimePartition};
pub use config::{Profile, RunConfig};
pub use error::{Error, Result};
pub use graph::PriorGraph;
pub use sampler::{McmcConfig, PosteriorSamples};
pub use summary::MpmFit;
