use super::{check_range, ModelError};
use crate::Scalar;

/// Pump-induced noise rate, affine in pump power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLine<T> {
    slope_hz_per_mw: T,
    intercept_hz: T,
}

impl<T: Scalar> NoiseLine<T> {
    pub fn new(slope_hz_per_mw: T, intercept_hz: T) -> Result<Self, ModelError> {
        check_range("noise slope_hz_per_mw", slope_hz_per_mw, slope_hz_per_mw >= T::zero(), "[0, inf)")?;
        check_range("noise intercept_hz", intercept_hz, intercept_hz >= T::zero(), "[0, inf)")?;
        Ok(Self { slope_hz_per_mw, intercept_hz })
    }

    pub fn zero() -> Self {
        Self { slope_hz_per_mw: T::zero(), intercept_hz: T::zero() }
    }

    pub fn slope_hz_per_mw(&self) -> T {
        self.slope_hz_per_mw
    }

    pub fn intercept_hz(&self) -> T {
        self.intercept_hz
    }

    pub fn rate_at(&self, p_mw: T) -> Result<T, ModelError> {
        if !(p_mw >= T::zero()) {
            return Err(ModelError::Domain { what: "pump power", value: p_mw.to_f64_lossy() });
        }
        Ok(self.intercept_hz + self.slope_hz_per_mw * p_mw)
    }
}

/// Noise count rate (counts/s) at pump power `p_mw`.
pub fn noise_rate<T: Scalar>(p_mw: T, line: &NoiseLine<T>) -> Result<T, ModelError> {
    line.rate_at(p_mw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn operating_point_rates() {
        let line = NoiseLine::new(0.036, 0.0).unwrap();
        assert_eq!(noise_rate(0.0, &line).unwrap(), 0.0);
        assert_relative_eq!(noise_rate(278.0, &line).unwrap(), 10.008, epsilon = 1e-12);
        assert_relative_eq!(noise_rate(139.0, &line).unwrap(), 5.004, epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(NoiseLine::new(-0.1, 0.0).is_err());
        assert!(NoiseLine::new(0.1, -1.0).is_err());
        let line = NoiseLine::new(0.036, 0.0).unwrap();
        assert!(matches!(noise_rate(-5.0, &line), Err(ModelError::Domain { .. })));
    }

    proptest! {
        #[test]
        fn affine(a in 0.0f64..1e3, b in 0.0f64..1e3, s in 0.0f64..1.0, c in 0.0f64..100.0) {
            let line = NoiseLine::new(s, c).unwrap();
            let lhs = line.rate_at(a).unwrap() + line.rate_at(b).unwrap() - c;
            let rhs = line.rate_at(a + b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
