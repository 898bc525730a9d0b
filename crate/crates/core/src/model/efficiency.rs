use std::f64::consts::FRAC_PI_2;

use super::{check_fraction, check_range, ModelError};
use crate::Scalar;

/// Pump-power law of a single difference-frequency stage,
/// `eta(P) = eta0 * sin^2(pi/2 * sqrt(P / pm))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyCurve<T> {
    eta0: T,
    pm_mw: T,
}

impl<T: Scalar> EfficiencyCurve<T> {
    pub fn new(eta0: T, pm_mw: T) -> Result<Self, ModelError> {
        check_fraction("eta0", eta0)?;
        check_range("pm_mw", pm_mw, pm_mw > T::zero(), "(0, inf)")?;
        Ok(Self { eta0, pm_mw })
    }

    /// Peak conversion efficiency.
    pub fn eta0(&self) -> T {
        self.eta0
    }

    /// Pump power reaching the peak, in mW.
    pub fn pm_mw(&self) -> T {
        self.pm_mw
    }

    pub fn efficiency_at(&self, p_mw: T) -> Result<T, ModelError> {
        if !(p_mw >= T::zero()) {
            return Err(ModelError::Domain { what: "pump power", value: p_mw.to_f64_lossy() });
        }
        Ok(self.eval_unchecked(p_mw))
    }

    /// Law evaluated without the domain check; callers guarantee `p_mw >= 0`.
    pub(crate) fn eval_unchecked(&self, p_mw: T) -> T {
        let s = (T::lit(FRAC_PI_2) * (p_mw / self.pm_mw).sqrt()).sin();
        self.eta0 * s * s
    }
}

pub fn stage_efficiency<T: Scalar>(p_mw: T, curve: &EfficiencyCurve<T>) -> Result<T, ModelError> {
    curve.efficiency_at(p_mw)
}
