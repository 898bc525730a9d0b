use super::{check_fraction, check_range, ModelError};
use crate::Scalar;

/// Above this per-window noise probability the `rate * width` approximation
/// of the Poisson hit probability is off by more than ~5 %.
pub const POISSON_THINNING_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec<T> {
    pub label: String,
    efficiency: T,
    dark_hz: T,
    jitter_sigma_ps: T,
}

impl<T: Scalar> DetectorSpec<T> {
    pub fn new(label: impl Into<String>, efficiency: T, dark_hz: T, jitter_sigma_ps: T) -> Result<Self, ModelError> {
        check_fraction("detector efficiency", efficiency)?;
        check_range("dark_hz", dark_hz, dark_hz >= T::zero(), "[0, inf)")?;
        check_range("jitter_sigma_ps", jitter_sigma_ps, jitter_sigma_ps >= T::zero(), "[0, inf)")?;
        Ok(Self { label: label.into(), efficiency, dark_hz, jitter_sigma_ps })
    }

    pub fn efficiency(&self) -> T {
        self.efficiency
    }

    pub fn dark_hz(&self) -> T {
        self.dark_hz
    }

    pub fn jitter_sigma_ps(&self) -> T {
        self.jitter_sigma_ps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalChannel {
    /// 493 nm photons on the photomultiplier.
    Pmt,
    /// Converted 1287 nm photons on the nanowire detector.
    Snspd,
}

/// Single-photon source as seen by the two detectors.
///
/// Each attempt emits at most one photon, so a signal detection lands on at
/// most one channel: the two window probabilities must sum to at most one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec<T> {
    tau_ns: T,
    p_pmt_window: T,
    p_snspd_window: T,
}

impl<T: Scalar> SourceSpec<T> {
    pub fn new(tau_ns: T, p_pmt_window: T, p_snspd_window: T) -> Result<Self, ModelError> {
        check_range("tau_ns", tau_ns, tau_ns > T::zero(), "(0, inf)")?;
        check_fraction("p_pmt_window", p_pmt_window)?;
        check_fraction("p_snspd_window", p_snspd_window)?;
        check_range(
            "p_pmt_window + p_snspd_window",
            p_pmt_window + p_snspd_window,
            p_pmt_window + p_snspd_window <= T::one(),
            "[0, 1]",
        )?;
        Ok(Self { tau_ns, p_pmt_window, p_snspd_window })
    }

    pub fn tau_ns(&self) -> T {
        self.tau_ns
    }

    pub fn p_window(&self, channel: SignalChannel) -> T {
        match channel {
            SignalChannel::Pmt => self.p_pmt_window,
            SignalChannel::Snspd => self.p_snspd_window,
        }
    }

    /// Fraction of an exponential pulse falling inside `[0, window_ns)` after
    /// excitation.
    pub fn capture_fraction(&self, window_ns: T) -> T {
        if window_ns <= T::zero() {
            return T::zero();
        }
        T::one() - (-window_ns / self.tau_ns).exp()
    }

    /// Fraction of the pulse in `[from_ns, to_ns)` relative to excitation.
    pub fn capture_between(&self, from_ns: T, to_ns: T) -> T {
        let a = from_ns.max(T::zero());
        let b = to_ns.max(T::zero());
        if b <= a {
            return T::zero();
        }
        (-a / self.tau_ns).exp() - (-b / self.tau_ns).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowProbability<T> {
    pub signal: T,
    pub noise: T,
    /// Set when `noise >= POISSON_THINNING_LIMIT`.
    pub approximation_degraded: bool,
}

/// Per-attempt signal and noise probabilities inside one detection window.
pub fn channel_window_probability<T: Scalar>(
    source: &SourceSpec<T>,
    channel: SignalChannel,
    noise_hz: T,
    window_ns: T,
) -> Result<WindowProbability<T>, ModelError> {
    check_range("window_ns", window_ns, window_ns > T::zero(), "(0, inf)")?;
    check_range("noise_hz", noise_hz, noise_hz >= T::zero(), "[0, inf)")?;
    let noise = noise_hz * window_ns * T::lit(1e-9);
    Ok(WindowProbability {
        signal: source.p_window(channel),
        noise,
        approximation_degraded: noise >= T::lit(POISSON_THINNING_LIMIT),
    })
}
