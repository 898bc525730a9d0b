#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Simulation and analysis toolkit for a trapped-ion single-photon source
//! whose 493 nm photons are shifted to the 1287 nm telecom O-band by two
//! cascaded frequency-conversion stages.
//!
//! The crate is split into five layers:
//!
//! * [`model`]: conversion-efficiency law, pump-induced noise, link budget and
//!   the least-squares fitters for both curves.
//! * [`sequencer`]: the cooling / pumping / trigger / excitation schedule and a
//!   seeded, worker-count-independent Monte Carlo producing time tags.
//! * [`analysis`]: trigger-relative histograms, windowed counts,
//!   signal-to-background ratios, cross-correlation `g2(n)`, pulse-shape
//!   comparison and window optimization.
//! * [`tagio`]: the `QTAG` binary tag format, its CSV twin, the experiment
//!   configuration file and report tables.
//! * [`cli`]: batch commands composing the layers above.
//!
//! Model and estimator types are generic over the scalar type; the aliases
//! below fix the precision for the common cases.

pub mod analysis;
pub mod cli;
pub mod model;
mod scalar;
pub mod sequencer;
pub mod tagio;

pub use scalar::Scalar;

pub use sequencer::{Channel, StreamHeader, TagRecord, TagStream};

/// Exact rational used where counting formulas should not round.
pub type Rational = num_rational::Ratio<i128>;

pub type EfficiencyCurve = model::EfficiencyCurve<f64>;
pub type EfficiencyCurve32 = model::EfficiencyCurve<f32>;
pub type NoiseLine = model::NoiseLine<f64>;
pub type NoiseLine32 = model::NoiseLine<f32>;
pub type StageSpec = model::StageSpec<f64>;
pub type CascadeSpec = model::CascadeSpec<f64>;
pub type DetectorSpec = model::DetectorSpec<f64>;
pub type SourceSpec = model::SourceSpec<f64>;
pub type SbrResult = analysis::SbrResult<f64>;
pub type CountSummary = analysis::CountSummary<f64>;
pub type ExactCountSummary = analysis::CountSummary<Rational>;
pub type NormalizedShape = analysis::NormalizedShape<f64>;
