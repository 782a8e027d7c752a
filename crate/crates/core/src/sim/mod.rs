//! Experiment configuration and the frame-by-frame simulation loop.
//!
//! A frame runs, in order: mobility and re-association, channel sampling,
//! scheduling, energy settlement with optimal WET, local training, and the
//! two-tier aggregation.

mod config;
mod experiment;

pub use config::{Mobility, Policy, Scheduling, SimConfig, Threshold};
pub use experiment::{
    associate, build_scenario, frozen_context, run_experiment, run_on, sample_channels, sample_frame_channel,
    AssociationRecord, ExperimentResult, RoundMetrics, Scenario, TraceRecord,
};

#[cfg(test)]
mod tests;
