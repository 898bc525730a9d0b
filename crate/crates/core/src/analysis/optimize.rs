use super::{window_counts, AnalysisError, Histogram, WindowSpec};

/// Expected background level under the histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Mean background counts per bin.
    PerBin(f64),
    /// Background measured as the mean per-bin count inside a window.
    Window(WindowSpec),
}

impl NoiseModel {
    pub fn per_bin(&self, hist: &Histogram) -> Result<f64, AnalysisError> {
        let v = match self {
            NoiseModel::PerBin(v) => *v,
            NoiseModel::Window(w) => window_counts(hist, w)? * hist.bin_width_ns() / w.width_ns,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(AnalysisError::Invalid { field: "noise per bin", value: v, legal: "[0, inf)" });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowCriterion {
    /// Largest signal-to-background ratio.
    MaxSbr,
    /// Largest captured signal among windows whose SBR reaches the floor.
    MaxCaptureAtSbrFloor(f64),
}

/// Window widths (in bins) and start bins considered by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanLimits {
    pub min_width_bins: usize,
    pub max_width_bins: usize,
    pub first_start_bin: usize,
    /// One past the last start bin; clipped to the histogram.
    pub end_start_bin: usize,
}

impl ScanLimits {
    pub fn widths(min_width_bins: usize, max_width_bins: usize) -> Self {
        Self { min_width_bins, max_width_bins, first_start_bin: 0, end_start_bin: usize::MAX }
    }

    pub fn fixed_width(bins: usize) -> Self {
        Self::widths(bins, bins)
    }

    pub fn starts(mut self, first: usize, end: usize) -> Self {
        self.first_start_bin = first;
        self.end_start_bin = end;
        self
    }
}

impl Default for ScanLimits {
    fn default() -> Self {
        Self::widths(1, usize::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedWindow {
    pub window: WindowSpec,
    pub start_bin: usize,
    pub width_bins: usize,
    /// Raw counts inside the window.
    pub total: f64,
    /// Expected background inside the window.
    pub noise: f64,
    /// `(total - noise) / noise`; infinite when the background is zero.
    pub sbr: f64,
    /// Background-subtracted counts inside the window over those of the
    /// whole histogram.
    pub capture: f64,
}

/// Exhaustive scan over bin-aligned windows. Ties go to the smaller width,
/// then the earlier start. With zero background and [`WindowCriterion::MaxSbr`]
/// every window has infinite SBR and the widest allowed window is returned.
pub fn optimize_window(
    hist: &Histogram,
    noise: &NoiseModel,
    criterion: WindowCriterion,
    limits: ScanLimits,
) -> Result<OptimizedWindow, AnalysisError> {
    let per_bin = noise.per_bin(hist)?;
    let n = hist.len();
    if !hist.counts.iter().any(|&c| c as f64 > per_bin) {
        return Err(AnalysisError::NoSignal);
    }
    let min_w = limits.min_width_bins.max(1);
    let max_w = limits.max_width_bins.min(n);
    let first = limits.first_start_bin;
    let end = limits.end_start_bin.min(n);
    if min_w > max_w || first >= end {
        return Err(AnalysisError::Invalid {
            field: "scan limits",
            value: min_w as f64,
            legal: "min width <= max width <= bins, first start < end start",
        });
    }
    if let WindowCriterion::MaxCaptureAtSbrFloor(f) = criterion {
        if !f.is_finite() {
            return Err(AnalysisError::Invalid { field: "SBR floor", value: f, legal: "finite" });
        }
    }

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &c in &hist.counts {
        prefix.push(prefix.last().unwrap() + c);
    }
    let area = hist.total() as f64 - per_bin * n as f64;

    let evaluate = |s: usize, w: usize| {
        let total = (prefix[s + w] - prefix[s]) as f64;
        let bg = per_bin * w as f64;
        let sbr = if bg > 0.0 {
            (total - bg) / bg
        } else if total > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
        (total, bg, sbr)
    };

    // (score, width, start); widths ascend and starts ascend, so only a
    // strictly better score replaces the incumbent.
    let mut best: Option<(f64, usize, usize)> = None;
    let zero_noise_sbr = per_bin == 0.0 && criterion == WindowCriterion::MaxSbr;
    for w in min_w..=max_w {
        let last_start = end.min(n + 1 - w);
        for s in first..last_start {
            let (total, bg, sbr) = evaluate(s, w);
            let score = match criterion {
                WindowCriterion::MaxSbr if zero_noise_sbr => {
                    // Widest window wins; prefer more counts at that width.
                    w as f64 * (hist.total() as f64 + 1.0) + total
                }
                WindowCriterion::MaxSbr => sbr,
                WindowCriterion::MaxCaptureAtSbrFloor(floor) => {
                    if !(sbr >= floor) {
                        continue;
                    }
                    total - bg
                }
            };
            if score.is_nan() {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _, _)) => score > b + 1e-12 * b.abs().max(1.0),
            };
            if better {
                best = Some((score, w, s));
            }
        }
    }

    let (_, w, s) = best.ok_or(match criterion {
        WindowCriterion::MaxCaptureAtSbrFloor(f) => AnalysisError::FloorUnreachable(f),
        WindowCriterion::MaxSbr => AnalysisError::NoSignal,
    })?;
    let (total, bg, sbr) = evaluate(s, w);
    Ok(OptimizedWindow {
        window: WindowSpec::new(hist.bin_start_ns(s), w as f64 * hist.bin_width_ns())?,
        start_bin: s,
        width_bins: w,
        total,
        noise: bg,
        sbr,
        capture: if area > 0.0 { (total - bg) / area } else { f64::NAN },
    })
}
