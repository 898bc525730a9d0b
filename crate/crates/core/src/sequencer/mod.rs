//! Attempt schedule and the seeded time-tag Monte Carlo.

mod schedule;
mod seed;
mod sim;
mod tags;

pub use schedule::{build_schedule, RunLength, RunPlan, Schedule, SequenceSpec, DEFAULT_TICK_PS};
pub use seed::split_seed;
pub use sim::{simulate_run, NoiseRates, SimulationSetup, Simulator};
pub use tags::{Channel, StreamHeader, TagRecord, TagSink, TagStream, CHANNEL_COUNT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{field} = {value} outside legal range {legal}")]
    Invalid { field: &'static str, value: f64, legal: &'static str },
    #[error("timestamp overflows the 64-bit tick range at cycle {cycle} ({ps} ps)")]
    TickOverflow { cycle: u64, ps: u128 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("tag sink failed: {0}")]
    Sink(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}
