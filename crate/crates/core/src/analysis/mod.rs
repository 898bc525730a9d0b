//! Observables computed from time-tag streams.
//!
//! Everything here is a single pass over a time-ordered stream: the
//! [`StreamCollector`] aligns detections to their most recent trigger and
//! keeps the in-range detections, from which histograms, windowed counts
//! and per-attempt hit lists are derived.

mod collect;
mod g2;
mod histogram;
mod optimize;
mod sbr;
mod shape;
mod window;

pub use collect::{
    build_histogram, AlignedDetection, ChannelData, CollectedRun, CollectorSettings, StreamCollector, TriggerAligner,
};
pub use g2::{g2_cross, g2_from_hits, CorrelationResult, HitList};
pub use histogram::Histogram;
pub use optimize::{optimize_window, NoiseModel, OptimizedWindow, ScanLimits, WindowCriterion};
pub use sbr::{expected_g2_zero, sbr, CountSummary, SbrResult};
pub use shape::{background_subtract_normalize, background_subtract_normalize_in, shape_overlap, NormalizedShape};
pub use window::{
    capture_fraction, default_noise_window, default_signal_window, window_counts, WindowSpec, DEFAULT_BIN_NS,
    DEFAULT_NOISE_DELAY_NS, DEFAULT_SIGNAL_WIDTH_NS,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{field} = {value} outside legal range {legal}")]
    Invalid { field: &'static str, value: f64, legal: &'static str },
    #[error("signal-to-background ratio undefined: noise window total is zero")]
    UndefinedSbr,
    #[error("g2 undefined: {0}")]
    UndefinedG2(&'static str),
    #[error("shape degenerate: no counts left after background subtraction")]
    DegenerateShape,
    #[error("binning mismatch: {0}")]
    BinningMismatch(String),
    #[error("no bin exceeds the noise level; nothing to optimize")]
    NoSignal,
    #[error("no window reaches the requested SBR floor {0}")]
    FloorUnreachable(f64),
    #[error("channel {0} is not a detector channel")]
    BadChannel(u8),
}

pub(crate) fn ns_to_ps(field: &'static str, ns: f64) -> Result<i64, AnalysisError> {
    let ps = (ns * 1e3).round();
    if !ps.is_finite() || ps.abs() >= i64::MAX as f64 {
        return Err(AnalysisError::Invalid { field, value: ns, legal: "finite, |x| < 9.2e6 s" });
    }
    Ok(ps as i64)
}
