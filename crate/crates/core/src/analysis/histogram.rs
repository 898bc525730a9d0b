use super::AnalysisError;

/// Trigger-relative detection counts on a uniform grid.
///
/// Bin `i` covers `[origin + i * width, origin + (i + 1) * width)`. Edges are
/// kept in integer picoseconds so that windows aligned to the grid select
/// whole bins exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub(crate) bin_width_ps: i64,
    pub(crate) origin_ps: i64,
    pub(crate) counts: Vec<u64>,
    pub(crate) attempts: u64,
}

impl Histogram {
    pub fn new(bin_width_ps: i64, origin_ps: i64, counts: Vec<u64>, attempts: u64) -> Result<Self, AnalysisError> {
        if bin_width_ps <= 0 {
            return Err(AnalysisError::Invalid {
                field: "bin width",
                value: bin_width_ps as f64 * 1e-3,
                legal: "(0, inf) ns",
            });
        }
        Ok(Self { bin_width_ps, origin_ps, counts, attempts })
    }

    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-3
    }

    pub fn origin_ns(&self) -> f64 {
        self.origin_ps as f64 * 1e-3
    }

    pub fn end_ns(&self) -> f64 {
        self.end_ps() as f64 * 1e-3
    }

    pub(crate) fn end_ps(&self) -> i64 {
        self.origin_ps + self.bin_width_ps * self.counts.len() as i64
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Leading edge of bin `i`, ns.
    pub fn bin_start_ns(&self, i: usize) -> f64 {
        (self.origin_ps + self.bin_width_ps * i as i64) as f64 * 1e-3
    }

    /// Index of the most populated bin; earliest on ties.
    pub fn peak_bin(&self) -> Option<usize> {
        let (mut best, mut best_count) = (None, 0);
        for (i, &c) in self.counts.iter().enumerate() {
            if c > best_count {
                best = Some(i);
                best_count = c;
            }
        }
        best
    }

    /// Counts per attempt.
    pub fn normalized(&self) -> Result<Vec<f64>, AnalysisError> {
        if self.attempts == 0 {
            return Err(AnalysisError::Invalid { field: "attempts", value: 0.0, legal: "> 0 for normalized views" });
        }
        let r = self.attempts as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / r).collect())
    }

    pub fn same_grid(&self, other: &Histogram) -> bool {
        self.bin_width_ps == other.bin_width_ps
            && self.origin_ps == other.origin_ps
            && self.counts.len() == other.counts.len()
    }

    /// Bin-wise sum of two shards of one run.
    pub fn merge(&mut self, other: &Histogram) -> Result<(), AnalysisError> {
        if !self.same_grid(other) {
            return Err(AnalysisError::BinningMismatch("histograms must share origin, width and length".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.attempts += other.attempts;
        Ok(())
    }

    /// Bins `[first, first + len)` as a new histogram.
    pub fn slice(&self, first: usize, len: usize) -> Result<Histogram, AnalysisError> {
        if first + len > self.counts.len() {
            return Err(AnalysisError::Invalid {
                field: "histogram slice end",
                value: (first + len) as f64,
                legal: "<= number of bins",
            });
        }
        Ok(Histogram {
            bin_width_ps: self.bin_width_ps,
            origin_ps: self.origin_ps + self.bin_width_ps * first as i64,
            counts: self.counts[first..first + len].to_vec(),
            attempts: self.attempts,
        })
    }

    /// Sum adjacent groups of `factor` bins; a short trailing group is dropped.
    pub fn rebin(&self, factor: usize) -> Result<Histogram, AnalysisError> {
        if factor == 0 {
            return Err(AnalysisError::Invalid { field: "rebin factor", value: 0.0, legal: ">= 1" });
        }
        Ok(Histogram {
            bin_width_ps: self.bin_width_ps * factor as i64,
            origin_ps: self.origin_ps,
            counts: self.counts.chunks_exact(factor).map(|c| c.iter().sum()).collect(),
            attempts: self.attempts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_grid_checks() {
        let mut a = Histogram::new(800, 0, vec![1, 2, 3], 10).unwrap();
        let b = Histogram::new(800, 0, vec![4, 5, 6], 5).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.counts(), &[5, 7, 9]);
        assert_eq!(a.attempts(), 15);
        let c = Histogram::new(400, 0, vec![0; 3], 1).unwrap();
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn peak_prefers_earliest() {
        let h = Histogram::new(800, 0, vec![0, 4, 2, 4], 1).unwrap();
        assert_eq!(h.peak_bin(), Some(1));
        assert_eq!(Histogram::new(800, 0, vec![0; 4], 1).unwrap().peak_bin(), None);
    }

    #[test]
    fn rebin_and_slice() {
        let h = Histogram::new(800, -800, vec![1, 2, 3, 4, 5], 1).unwrap();
        let r = h.rebin(2).unwrap();
        assert_eq!(r.counts(), &[3, 7]);
        assert_eq!(r.bin_width_ns(), 1.6);
        let s = h.slice(1, 3).unwrap();
        assert_eq!(s.counts(), &[2, 3, 4]);
        assert_eq!(s.origin_ns(), 0.0);
        assert!(h.slice(4, 2).is_err());
    }

    #[test]
    fn normalized_needs_attempts() {
        assert!(Histogram::new(800, 0, vec![1], 0).unwrap().normalized().is_err());
        assert_eq!(Histogram::new(800, 0, vec![2], 4).unwrap().normalized().unwrap(), vec![0.5]);
    }
}
