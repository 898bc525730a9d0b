use super::{ns_to_ps, AnalysisError, Histogram};

pub const DEFAULT_BIN_NS: f64 = 0.8;
pub const DEFAULT_SIGNAL_WIDTH_NS: f64 = 41.6;
pub const DEFAULT_NOISE_DELAY_NS: f64 = 300.0;

/// Trigger-relative half-open window `[start, start + width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub start_ns: f64,
    pub width_ns: f64,
}

impl WindowSpec {
    pub fn new(start_ns: f64, width_ns: f64) -> Result<Self, AnalysisError> {
        if !(width_ns > 0.0) || !width_ns.is_finite() || !start_ns.is_finite() {
            return Err(AnalysisError::Invalid { field: "window width", value: width_ns, legal: "(0, inf) ns" });
        }
        Ok(Self { start_ns, width_ns })
    }

    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.width_ns
    }

    pub fn shifted(&self, by_ns: f64) -> Self {
        Self { start_ns: self.start_ns + by_ns, width_ns: self.width_ns }
    }

    pub(crate) fn bounds_ps(&self) -> Result<(i64, i64), AnalysisError> {
        let a = ns_to_ps("window start", self.start_ns)?;
        let w = ns_to_ps("window width", self.width_ns)?;
        Ok((a, a + w))
    }

    /// Whole-bin index range `[first, last)` when the window is aligned to
    /// the grid of `hist` and inside it.
    pub(crate) fn aligned_bins(&self, hist: &Histogram) -> Option<(usize, usize)> {
        let (a, b) = self.bounds_ps().ok()?;
        let w = hist.bin_width_ps;
        if (a - hist.origin_ps) % w != 0 || (b - hist.origin_ps) % w != 0 {
            return None;
        }
        if a < hist.origin_ps || b > hist.end_ps() {
            return None;
        }
        Some((((a - hist.origin_ps) / w) as usize, ((b - hist.origin_ps) / w) as usize))
    }

    pub fn within(&self, hist: &Histogram) -> bool {
        match self.bounds_ps() {
            Ok((a, b)) => a >= hist.origin_ps && b <= hist.end_ps(),
            Err(_) => false,
        }
    }
}

/// Counts of `hist` inside `w`. Bins cut by a window edge contribute in
/// proportion to the covered fraction of the bin; the part of a window
/// outside the histogram contributes nothing.
pub fn window_counts(hist: &Histogram, w: &WindowSpec) -> Result<f64, AnalysisError> {
    let (a, b) = w.bounds_ps()?;
    let a = a.max(hist.origin_ps);
    let b = b.min(hist.end_ps());
    if b <= a {
        return Ok(0.0);
    }
    let width = hist.bin_width_ps;
    let first = ((a - hist.origin_ps) / width) as usize;
    let last = ((b - hist.origin_ps + width - 1) / width) as usize;
    let mut total = 0.0;
    for i in first..last.min(hist.counts.len()) {
        let lo = hist.origin_ps + width * i as i64;
        let hi = lo + width;
        let covered = hi.min(b) - lo.max(a);
        let c = hist.counts[i] as f64;
        total += if covered == width { c } else { c * covered as f64 / width as f64 };
    }
    Ok(total)
}

/// Photon window of `width_ns` starting one bin before the leading edge of
/// the histogram's peak bin.
pub fn default_signal_window(hist: &Histogram, width_ns: f64) -> Result<WindowSpec, AnalysisError> {
    let peak = hist.peak_bin().ok_or(AnalysisError::NoSignal)?;
    WindowSpec::new(hist.bin_start_ns(peak) - hist.bin_width_ns(), width_ns)
}

/// Noise window: same width, delayed by `delay_ns` from the signal window.
pub fn default_noise_window(signal: &WindowSpec, delay_ns: f64) -> WindowSpec {
    signal.shifted(delay_ns)
}

/// Share of the background-subtracted pulse area falling inside the signal
/// window, with the background level taken from the noise window. The pulse
/// is taken to lie between the signal window start and the noise window
/// start, or the histogram end when the noise window comes first.
pub fn capture_fraction(hist: &Histogram, signal: &WindowSpec, noise: &WindowSpec) -> Result<f64, AnalysisError> {
    let t = window_counts(hist, signal)?;
    let n = window_counts(hist, noise)?;
    let per_ns = n / noise.width_ns;
    let end_ns = if noise.start_ns > signal.start_ns { noise.start_ns } else { hist.end_ns() };
    let pulse = WindowSpec::new(signal.start_ns, end_ns - signal.start_ns)?;
    let area = window_counts(hist, &pulse)? - per_ns * pulse.width_ns;
    let inside = t - per_ns * signal.width_ns;
    if !(area > 0.0) {
        return Err(AnalysisError::NoSignal);
    }
    Ok(inside / area)
}
