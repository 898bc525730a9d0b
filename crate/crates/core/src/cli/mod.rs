//! Batch commands. Each returns a [`Report`] or writes a tag file; the
//! binary only parses arguments and maps errors to exit codes.

mod commands;
mod units;

pub use commands::{
    analyze_run, cmd_analyze, cmd_fit, cmd_g2, cmd_report, cmd_simulate, cmd_sweep, collect_file, correlate_run,
    AnalysisParams, ChannelSummary, FitLaw, RunAnalysis, SimulateOptions, SimulateSummary, DEFAULT_ATTEMPTS,
};
pub use units::{parse_count, parse_duration_ns, parse_duration_ps, parse_duration_s, parse_grid};

pub use crate::tagio::{Cell, Report, Table};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::model::ModelError;
use crate::sequencer::SimError;
use crate::tagio::{ConfigError, ReportError, TagIoError};

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invariant(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => CliError::Io(format!("config: {io}")),
            ConfigError::Range { .. } | ConfigError::Conflict(..) => CliError::Invariant(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<TagIoError> for CliError {
    fn from(e: TagIoError) -> Self {
        match e {
            TagIoError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Parse(format!("tag file: {other}")),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Sink(io) => CliError::Io(io.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Parse { .. } => CliError::Parse(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}
