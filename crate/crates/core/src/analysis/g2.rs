use super::{AnalysisError, CollectorSettings, StreamCollector, WindowSpec};
use crate::sequencer::TagRecord;

/// Sorted, duplicate-free indices of attempts with an in-window detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HitList {
    pub attempts: u64,
    pub hits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    /// Separations in shift units, `-max_n ..= max_n`.
    pub n_values: Vec<i64>,
    pub g2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub coincidences: Vec<u64>,
    pub attempts: u64,
    /// Attempts with a channel-1 hit.
    pub c1_total: u64,
    /// Attempts with a channel-2 hit.
    pub c2_total: u64,
    pub attempts_per_shift: u64,
}

impl CorrelationResult {
    pub fn at(&self, n: i64) -> Option<(f64, f64, u64)> {
        let i = self.n_values.iter().position(|&v| v == n)?;
        Some((self.g2[i], self.sigma[i], self.coincidences[i]))
    }

    /// Mean and standard error of `g2(n)` over `n != 0`.
    pub fn off_zero_mean(&self) -> Option<(f64, f64)> {
        let (mut sum, mut var, mut k) = (0.0, 0.0, 0usize);
        for (i, &n) in self.n_values.iter().enumerate() {
            if n != 0 {
                sum += self.g2[i];
                var += self.sigma[i] * self.sigma[i];
                k += 1;
            }
        }
        (k > 0).then(|| (sum / k as f64, var.sqrt() / k as f64))
    }
}

/// Cross-correlation of two per-attempt hit lists.
///
/// `C12(n)` counts attempts `i` with a channel-1 hit and a channel-2 hit at
/// attempt `i + n * attempts_per_shift`;
/// `g2(n) = R * C12(n) / (C1_total * C2_total)` with Poisson error
/// `g2 / sqrt(C12)`. An empty bin reports `g2 = 0` and the one-count bound
/// `R / (C1_total * C2_total)` as its error.
pub fn g2_from_hits(
    h1: &HitList,
    h2: &HitList,
    max_n: u64,
    attempts_per_shift: u64,
) -> Result<CorrelationResult, AnalysisError> {
    let attempts = h1.attempts.max(h2.attempts);
    if attempts == 0 {
        return Err(AnalysisError::UndefinedG2("no attempts"));
    }
    if attempts_per_shift == 0 {
        return Err(AnalysisError::Invalid { field: "attempts per shift", value: 0.0, legal: ">= 1" });
    }
    let (c1, c2) = (h1.hits.len() as u64, h2.hits.len() as u64);
    if c1 == 0 || c2 == 0 {
        return Err(AnalysisError::UndefinedG2("a channel has no in-window detections"));
    }
    let max_n = max_n.min(i64::MAX as u64 / attempts_per_shift.max(1)) as i64;
    let span = max_n as i128 * attempts_per_shift as i128;
    let mut coincidences = vec![0u64; 2 * max_n as usize + 1];

    let mut lo = 0usize;
    for &i in &h1.hits {
        let i = i as i128;
        while lo < h2.hits.len() && (h2.hits[lo] as i128) < i - span {
            lo += 1;
        }
        for &j in &h2.hits[lo..] {
            let d = j as i128 - i;
            if d > span {
                break;
            }
            if d % attempts_per_shift as i128 == 0 {
                let n = d / attempts_per_shift as i128;
                coincidences[(n + max_n as i128) as usize] += 1;
            }
        }
    }

    let norm = attempts as f64 / (c1 as f64 * c2 as f64);
    let n_values: Vec<i64> = (-max_n..=max_n).collect();
    let g2: Vec<f64> = coincidences.iter().map(|&c| c as f64 * norm).collect();
    let sigma =
        coincidences.iter().zip(&g2).map(|(&c, &g)| if c == 0 { norm } else { g / (c as f64).sqrt() }).collect();
    Ok(CorrelationResult {
        n_values,
        g2,
        sigma,
        coincidences,
        attempts,
        c1_total: c1,
        c2_total: c2,
        attempts_per_shift,
    })
}

/// `g2(n)` between photomultiplier detections in `window1` and nanowire
/// detections in `window2`, straight from a time-ordered stream.
pub fn g2_cross<'a, I>(
    records: I,
    tick_ps: u32,
    window1: &WindowSpec,
    window2: &WindowSpec,
    max_n: u64,
    attempts_per_shift: u64,
) -> Result<CorrelationResult, AnalysisError>
where
    I: IntoIterator<Item = &'a TagRecord>,
{
    let mut c = StreamCollector::new(CollectorSettings {
        tick_ps,
        bin_width_ns: tick_ps as f64 * 1e-3,
        range_start_ns: window1.start_ns.min(window2.start_ns),
        range_end_ns: window1.end_ns().max(window2.end_ns()),
    })?;
    for r in records {
        c.push(r);
    }
    let run = c.finish();
    g2_from_hits(&run.pmt().hits(window1)?, &run.snspd().hits(window2)?, max_n, attempts_per_shift)
}
