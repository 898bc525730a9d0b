use num_traits::Num;

use super::AnalysisError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbrResult<T> {
    pub value: T,
    pub sigma: T,
    /// Counts in the photon window, signal plus background.
    pub signal_total: T,
    /// Counts in the equal-width noise window.
    pub noise_total: T,
}

/// Signal-to-background ratio `(T - N) / N` with shot-noise error
/// `sqrt(T / N^2 + T^2 / N^3)`.
pub fn sbr<T: Scalar>(signal_total: T, noise_total: T) -> Result<SbrResult<T>, AnalysisError> {
    if !(signal_total >= T::zero()) || !signal_total.is_finite() {
        return Err(AnalysisError::Invalid {
            field: "signal window total",
            value: signal_total.to_f64_lossy(),
            legal: "[0, inf)",
        });
    }
    if !(noise_total >= T::zero()) || !noise_total.is_finite() {
        return Err(AnalysisError::Invalid {
            field: "noise window total",
            value: noise_total.to_f64_lossy(),
            legal: "[0, inf)",
        });
    }
    if noise_total == T::zero() {
        return Err(AnalysisError::UndefinedSbr);
    }
    let (t, n) = (signal_total, noise_total);
    Ok(SbrResult {
        value: (t - n) / n,
        sigma: (t / (n * n) + t * t / (n * n * n)).sqrt(),
        signal_total: t,
        noise_total: n,
    })
}

/// Background-subtracted signal and noise counts of both channels.
///
/// `c1*` and `c2*` may be either detector; the expected `g2(0)` is symmetric
/// under exchanging them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSummary<T> {
    pub c1s: T,
    pub c1n: T,
    pub c2s: T,
    pub c2n: T,
    pub attempts: T,
}

impl<T: Num + Copy + PartialOrd> CountSummary<T> {
    pub fn new(c1s: T, c1n: T, c2s: T, c2n: T, attempts: T) -> Result<Self, AnalysisError> {
        let z = T::zero();
        for (field, v) in [("C1S", c1s), ("C1N", c1n), ("C2S", c2s), ("C2N", c2n)] {
            if !(v >= z) {
                return Err(AnalysisError::Invalid { field, value: f64::NAN, legal: "[0, inf)" });
            }
        }
        if !(attempts > z) {
            return Err(AnalysisError::Invalid { field: "R (attempts)", value: f64::NAN, legal: "(0, inf)" });
        }
        Ok(Self { c1s, c1n, c2s, c2n, attempts })
    }

    pub fn c1_total(&self) -> T {
        self.c1s + self.c1n
    }

    pub fn c2_total(&self) -> T {
        self.c2s + self.c2n
    }

    /// Scale every count (including `R`) by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self { c1s: self.c1s * k, c1n: self.c1n * k, c2s: self.c2s * k, c2n: self.c2n * k, attempts: self.attempts * k }
    }
}

/// Expected same-attempt `g2(0)` produced by background alone:
/// `G = (C1S*C2N + C1N*C2S + 2*C1N*C2N) / R`, normalized by
/// `C1_total * C2_total / R`.
///
/// Only field operations are used, so exact rationals give exact results.
pub fn expected_g2_zero<T: Num + Copy + PartialOrd>(c: &CountSummary<T>) -> Result<T, AnalysisError> {
    let (t1, t2) = (c.c1_total(), c.c2_total());
    if !(t1 > T::zero()) || !(t2 > T::zero()) {
        return Err(AnalysisError::UndefinedG2("a channel total is zero"));
    }
    if !(c.attempts > T::zero()) {
        return Err(AnalysisError::UndefinedG2("no attempts"));
    }
    let two = T::one() + T::one();
    let unnormalized = (c.c1s * c.c2n + c.c1n * c.c2s + two * c.c1n * c.c2n) / c.attempts;
    let normalization = t1 * t2 / c.attempts;
    Ok(unnormalized / normalization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn telecom_sbr() {
        let r = sbr(3.956e5, 3.59e3).unwrap();
        assert_relative_eq!(r.value, 109.195, epsilon = 1e-3);
        assert!((1.7..=2.0).contains(&r.sigma), "{}", r.sigma);
        assert_relative_eq!(r.sigma, 1.8475, epsilon = 1e-3);
    }

    #[test]
    fn visible_sbr() {
        let r = sbr(1.3249e6, 5.49e4).unwrap();
        assert_relative_eq!(r.value, 23.133, epsilon = 1e-3);
        assert!((0.09..=0.12).contains(&r.sigma), "{}", r.sigma);
    }

    #[test]
    fn doubled_noise_is_unit_sbr() {
        assert_eq!(sbr(200.0, 100.0).unwrap().value, 1.0);
        assert_eq!(sbr(200.0f32, 100.0).unwrap().value, 1.0);
    }

    #[test]
    fn zero_noise_is_undefined() {
        assert_eq!(sbr(10.0, 0.0), Err(AnalysisError::UndefinedSbr));
        assert!(sbr(-1.0, 4.0).is_err());
    }

    #[test]
    fn g2_from_published_counts() {
        let c = CountSummary::new(3.92e5, 3.59e3, 1.27e6, 5.49e4, 1.54e9).unwrap();
        let g = expected_g2_zero(&c).unwrap();
        assert_relative_eq!(g, 0.0505, epsilon = 5e-4);
    }

    #[test]
    fn g2_limits_exact() {
        let r = |n: i128| Rational::from_integer(n);
        let no_noise = CountSummary::new(r(392_000), r(0), r(1_270_000), r(0), r(1_540_000_000)).unwrap();
        assert_eq!(expected_g2_zero(&no_noise).unwrap(), r(0));
        let no_signal = CountSummary::new(r(0), r(3_590), r(0), r(54_900), r(1_540_000_000)).unwrap();
        assert_eq!(expected_g2_zero(&no_signal).unwrap(), r(2));
        let empty = CountSummary::new(r(0), r(0), r(5), r(5), r(10)).unwrap();
        assert!(expected_g2_zero(&empty).is_err());
        assert!(CountSummary::new(r(1), r(1), r(1), r(1), r(0)).is_err());
    }

    proptest! {
        #[test]
        fn sbr_scaling(t in 1u32..1_000_000, n in 1u32..100_000, k in 1u32..50) {
            let a = sbr(t as f64, n as f64).unwrap();
            let b = sbr((t as f64) * k as f64, (n as f64) * k as f64).unwrap();
            prop_assert!((a.value - b.value).abs() <= 1e-9 * (1.0 + a.value.abs()));
            let expect = a.sigma / (k as f64).sqrt();
            prop_assert!((b.sigma - expect).abs() <= 1e-9 * expect.max(1e-12));
        }

        #[test]
        fn g2_homogeneous_degree_zero(c in proptest::array::uniform5(0i64..1_000_000), k in 1i64..1000) {
            let r = |x: i64| Rational::from_integer(x as i128);
            prop_assume!(c[0] + c[1] > 0 && c[2] + c[3] > 0);
            let s = CountSummary::new(r(c[0]), r(c[1]), r(c[2]), r(c[3]), r(c[4] + 1)).unwrap();
            prop_assert_eq!(expected_g2_zero(&s).unwrap(), expected_g2_zero(&s.scaled(r(k))).unwrap());
        }
    }
}
