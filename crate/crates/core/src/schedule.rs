//! Time-decaying risk-aversion schedules and the inversion between the
//! delta tilt `psi` and absolute risk aversion `R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    /// `psi(tau) = gamma (1 - exp(-gamma tau / T))`
    Exponential,
    /// Zero up to `delay`, then `delay (1 - exp(-gamma (tau - delay)))`.
    DelayedExponential {
        delay: f64,
    },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAversionSchedule {
    pub family: PsiFamily,
    pub gamma: f64,
    pub horizon: f64,
}

impl RiskAversionSchedule {
    pub fn exponential(gamma: f64, horizon: f64) -> Result<Self> {
        Self::new(PsiFamily::Exponential, gamma, horizon)
    }

    pub fn delayed(delay: f64, gamma: f64, horizon: f64) -> Result<Self> {
        Self::new(PsiFamily::DelayedExponential { delay }, gamma, horizon)
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(PsiFamily::Zero, 0.0, horizon)
    }

    pub fn new(family: PsiFamily, gamma: f64, horizon: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::param("gamma", format!("must be non-negative, got {gamma}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        if let PsiFamily::DelayedExponential { delay } = family {
            if !(delay.is_finite() && delay >= 0.0) {
                return Err(Error::param("delay", format!("must be non-negative, got {delay}")));
            }
        }
        Ok(Self { family, gamma, horizon })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, PsiFamily::Zero)
    }

    /// Delta tilt at time-to-maturity `tau`.
    pub fn psi(&self, tau: f64) -> Result<f64> {
        let slack = 1e-12 * self.horizon;
        if !(tau >= 0.0 && tau <= self.horizon + slack) {
            return Err(Error::Domain {
                what: "tau",
                value: tau,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        let tau = tau.min(self.horizon);
        let g = self.gamma;
        Ok(match self.family {
            PsiFamily::Exponential => -g * (-g * tau / self.horizon).exp_m1(),
            PsiFamily::DelayedExponential { delay } => {
                if tau <= delay {
                    0.0
                } else {
                    -delay * (-g * (tau - delay)).exp_m1()
                }
            }
            PsiFamily::Zero => 0.0,
        })
    }

    /// First-order expansion `gamma^2 tau / T` of the exponential family.
    pub fn psi_small_tau(&self, tau: f64) -> Result<f64> {
        match self.family {
            PsiFamily::Exponential => Ok(self.gamma * self.gamma * tau / self.horizon),
            PsiFamily::Zero => Ok(0.0),
            PsiFamily::DelayedExponential { .. } => Err(Error::param(
                "family",
                "small-tau expansion is defined for the exponential family only",
            )),
        }
    }
}

/// Absolute risk aversion, with `Infinite` standing for the minimum-variance hedger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RiskAversion {
    Finite(f64),
    Infinite,
}

impl RiskAversion {
    pub fn from_relative(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) || c == 0.0 {
            return Err(Error::Domain {
                what: "relative risk aversion",
                value: c,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(if c == 1.0 {
            RiskAversion::Infinite
        } else {
            RiskAversion::Finite(c / (1.0 - c))
        })
    }

    /// `C = R / (1 + R)`.
    pub fn relative(&self) -> f64 {
        match *self {
            RiskAversion::Finite(r) => r / (1.0 + r),
            RiskAversion::Infinite => 1.0,
        }
    }

    /// `1 / R`, exactly zero when infinite. Every tilt term is linear in this.
    pub fn inverse(&self) -> f64 {
        match *self {
            RiskAversion::Finite(r) => 1.0 / r,
            RiskAversion::Infinite => 0.0,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, RiskAversion::Infinite)
    }
}

/// `R = mu / (2 psi S sigma^2)`; a zero tilt means infinite risk aversion.
pub fn risk_aversion_from_psi(psi: f64, spot: f64, drift: f64, volatility: f64) -> Result<RiskAversion> {
    if !(psi.is_finite() && psi >= 0.0) {
        return Err(Error::param("psi", format!("must be non-negative, got {psi}")));
    }
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::param("spot", format!("must be positive, got {spot}")));
    }
    if !(volatility.is_finite() && volatility > 0.0) {
        return Err(Error::param(
            "volatility",
            format!("must be positive, got {volatility}"),
        ));
    }
    if psi == 0.0 {
        return Ok(RiskAversion::Infinite);
    }
    Ok(RiskAversion::Finite(
        drift / (2.0 * psi * spot * volatility * volatility),
    ))
}
