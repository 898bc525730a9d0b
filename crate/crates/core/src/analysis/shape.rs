use super::{window_counts, AnalysisError, Histogram, WindowSpec};
use crate::Scalar;

/// Background-subtracted histogram scaled to unit area.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedShape<T> {
    pub bin_width_ps: i64,
    pub origin_ps: i64,
    pub values: Vec<T>,
}

impl<T: Scalar> NormalizedShape<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v)
    }

    pub fn bin_center_ns(&self, i: usize) -> f64 {
        (self.origin_ps as f64 + (i as f64 + 0.5) * self.bin_width_ps as f64) * 1e-3
    }

    /// Decay constant from a weighted log-linear fit over the bins from the
    /// peak onward. Bin weights are the bin values, matching the Poisson
    /// variance of a log count.
    pub fn decay_constant_ns(&self) -> Option<f64> {
        let peak = (0..self.len()).max_by(|&a, &b| {
            self.values[a].partial_cmp(&self.values[b]).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
        })?;
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in peak..self.len() {
            let y = self.values[i].to_f64_lossy();
            if y <= 0.0 {
                continue;
            }
            let (x, ly) = (self.bin_center_ns(i), y.ln());
            sw += y;
            sx += y * x;
            sy += y * ly;
            sxx += y * x * x;
            sxy += y * x * ly;
        }
        let det = sw * sxx - sx * sx;
        if !(det > 0.0) {
            return None;
        }
        let slope = (sw * sxy - sx * sy) / det;
        (slope < 0.0).then(|| -1.0 / slope)
    }
}

/// Subtract the mean per-bin count of `noise_window` from every bin, clamp at
/// zero and scale to unit area.
pub fn background_subtract_normalize<T: Scalar>(
    hist: &Histogram,
    noise_window: &WindowSpec,
) -> Result<NormalizedShape<T>, AnalysisError> {
    subtract_and_normalize(hist, noise_window, 0, hist.len())
}

/// As [`background_subtract_normalize`], keeping only the bins inside
/// `region`, which must lie on the histogram grid.
pub fn background_subtract_normalize_in<T: Scalar>(
    hist: &Histogram,
    noise_window: &WindowSpec,
    region: &WindowSpec,
) -> Result<NormalizedShape<T>, AnalysisError> {
    let (first, last) = region.aligned_bins(hist).ok_or_else(|| {
        AnalysisError::BinningMismatch(format!(
            "region [{}, {}) ns is not on the histogram grid",
            region.start_ns,
            region.end_ns()
        ))
    })?;
    subtract_and_normalize(hist, noise_window, first, last)
}

fn subtract_and_normalize<T: Scalar>(
    hist: &Histogram,
    noise_window: &WindowSpec,
    first: usize,
    last: usize,
) -> Result<NormalizedShape<T>, AnalysisError> {
    if !noise_window.within(hist) {
        return Err(AnalysisError::Invalid {
            field: "noise window start",
            value: noise_window.start_ns,
            legal: "window inside the histogram range",
        });
    }
    let floor = window_counts(hist, noise_window)? * hist.bin_width_ns() / noise_window.width_ns;
    let floor = T::lit(floor);
    let raw: Vec<T> = hist.counts[first..last]
        .iter()
        .map(|&c| {
            let v = T::lit(c as f64) - floor;
            if v > T::zero() {
                v
            } else {
                T::zero()
            }
        })
        .collect();
    let sum = raw.iter().fold(T::zero(), |a, &v| a + v);
    if !(sum > T::zero()) {
        return Err(AnalysisError::DegenerateShape);
    }
    Ok(NormalizedShape {
        bin_width_ps: hist.bin_width_ps,
        origin_ps: hist.origin_ps + hist.bin_width_ps * first as i64,
        values: raw.into_iter().map(|v| v / sum).collect(),
    })
}

/// Total-variation overlap `1 - sum|a - b| / 2` of two shapes on the same grid.
pub fn shape_overlap<T: Scalar>(a: &NormalizedShape<T>, b: &NormalizedShape<T>) -> Result<T, AnalysisError> {
    if a.bin_width_ps != b.bin_width_ps || a.origin_ps != b.origin_ps || a.len() != b.len() {
        return Err(AnalysisError::BinningMismatch(format!(
            "{} bins of {} ps from {} ps vs {} bins of {} ps from {} ps",
            a.len(),
            a.bin_width_ps,
            a.origin_ps,
            b.len(),
            b.bin_width_ps,
            b.origin_ps
        )));
    }
    let tv = a.values.iter().zip(&b.values).fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs());
    let v = T::one() - tv / T::lit(2.0);
    Ok(v.max(T::zero()).min(T::one()))
}
