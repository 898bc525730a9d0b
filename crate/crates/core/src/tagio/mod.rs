//! On-disk tag streams, experiment configuration and report tables.

mod binary;
mod config;
mod csv;
mod report;

pub use binary::{read_tags_binary, write_tags, TagReader, TagWriter, HEADER_LEN, MAGIC, RECORD_LEN, VERSION};
pub use config::{
    config_digest, load_config, load_config_file, ExperimentConfig, RunSettings, WindowDefaults, CONFIG_KEYS,
};
pub use csv::{read_tags_csv, write_tags_csv};
pub use report::{Cell, Report, ReportError, Table};

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::sequencer::TagStream;

#[derive(Debug, Error)]
pub enum TagIoError {
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error("{}at byte {offset}: {message}", record.map(|r| format!("record {r} ")).unwrap_or_default())]
    Format { offset: u64, record: Option<u64>, message: String },
    #[error("stream not time-ordered at record {index}")]
    Unordered { index: u64 },
}

impl TagIoError {
    pub(crate) fn format(offset: u64, record: Option<u64>, message: impl Into<String>) -> Self {
        TagIoError::Format { offset, record, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("config key `{key}` = {value}: legal range {legal}")]
    Range { key: String, value: String, legal: String },
    #[error("config keys `{0}` and `{1}` are mutually exclusive")]
    Conflict(&'static str, &'static str),
    #[error("reading config: {0}")]
    Io(#[from] io::Error),
}

/// Read a tag stream in either format. Files whose first byte is `#` or an
/// ASCII digit are read as CSV, everything else as binary.
pub fn read_tags<R: Read>(source: R) -> Result<TagStream, TagIoError> {
    let mut source = BufReader::new(source);
    let first = {
        use std::io::BufRead;
        source.fill_buf()?.first().copied()
    };
    match first {
        Some(b) if b == b'#' || b.is_ascii_digit() => read_tags_csv(source),
        _ => read_tags_binary(source),
    }
}

pub fn read_tags_path(path: impl AsRef<Path>) -> Result<TagStream, TagIoError> {
    read_tags(File::open(path)?)
}

/// Write `stream` as binary to `path`, returning the file size.
pub fn write_tags_path(stream: &TagStream, path: impl AsRef<Path>) -> Result<u64, TagIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_tags(stream, &mut w)?;
    w.flush()?;
    Ok(n)
}
