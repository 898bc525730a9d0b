//! Closed-form link physics: the pump-power conversion law, pump-induced
//! noise, link-budget arithmetic and fitters for the two characterization
//! curves.

mod cascade;
mod efficiency;
mod fit;
mod noise;
mod source;

pub use cascade::{cascade_throughput, CascadeSpec, Polarization, StageSpec};
pub use efficiency::{stage_efficiency, EfficiencyCurve};
pub use fit::{fit_efficiency_curve, fit_noise_line, CurveFit, FitPoint, NoiseFit};
pub use noise::{noise_rate, NoiseLine};
pub use source::{
    channel_window_probability, DetectorSpec, SignalChannel, SourceSpec, WindowProbability, POISSON_THINNING_LIMIT,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{what} must be >= 0, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("{field} = {value} outside legal range {legal}")]
    Invariant { field: &'static str, value: f64, legal: &'static str },
    #[error("fit failed: {0}")]
    Fit(String),
}

pub(crate) fn check_range<T: crate::Scalar>(
    field: &'static str,
    value: T,
    ok: bool,
    legal: &'static str,
) -> Result<T, ModelError> {
    if ok && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::Invariant { field, value: value.to_f64_lossy(), legal })
    }
}

pub(crate) fn check_fraction<T: crate::Scalar>(field: &'static str, value: T) -> Result<T, ModelError> {
    check_range(field, value, value >= T::zero() && value <= T::one(), "[0, 1]")
}
