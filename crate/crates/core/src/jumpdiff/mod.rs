//! Two risky assets sharing one Brownian motion and one Poisson process:
//! risk-neutral delta pair, mean-variance corrections and hedge simulation.

mod claim;
mod deltas;
mod hedge;

pub use claim::{jump_price, ClaimQuote, JumpPayoff, JumpPricing, McClaim, MonomialClaim, TwoAssetClaim};
pub use deltas::{
    jump_utility, optimal_deltas_jump, reference_corrections, rn_deltas_jump, rn_step_variances, OptimalDeltas,
};
pub use hedge::simulate_hedge_jump;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{breakpoints, ParamSchedule};

/// Smallest admissible `|sigma1 gamma2 - gamma1 sigma2|`.
pub const SPANNING_EPS: f64 = 1e-8;

/// How a jump moves the claim's arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displacement {
    /// `x -> x (1 + gamma)`, matching proportional jumps in the prices.
    #[default]
    Proportional,
    /// `x -> x + gamma`, the literal shift.
    Additive,
}

/// `dS_j / S_j = mu_j dt + sigma_j dB + gamma_j dN`, with `N` Poisson of intensity `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    pub drift: [ParamSchedule; 2],
    pub volatility: [ParamSchedule; 2],
    pub jump: [ParamSchedule; 2],
    pub intensity: ParamSchedule,
    pub rate: ParamSchedule,
    pub spot: [f64; 2],
    /// Maturity of the second asset; must outlive the hedging horizon.
    pub maturity2: f64,
    pub displacement: Displacement,
}

/// Model coefficients frozen at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpParams {
    pub drift: [f64; 2],
    pub volatility: [f64; 2],
    pub jump: [f64; 2],
    pub intensity: f64,
    pub rate: f64,
}

impl JumpParams {
    /// `sigma1 gamma2 - gamma1 sigma2`, the denominator of every hedge formula.
    pub fn loading_det(&self) -> f64 {
        self.volatility[0] * self.jump[1] - self.jump[0] * self.volatility[1]
    }

    /// Expected instantaneous return per unit of each asset under the physical measure.
    pub fn total_drift(&self) -> [f64; 2] {
        [0, 1].map(|j| self.drift[j] + self.intensity * self.jump[j])
    }
}

impl JumpModel {
    /// Constant coefficients with proportional displacement.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        drift: [f64; 2],
        volatility: [f64; 2],
        jump: [f64; 2],
        intensity: f64,
        rate: f64,
        spot: [f64; 2],
        maturity2: f64,
    ) -> Self {
        Self {
            drift: drift.map(ParamSchedule::constant),
            volatility: volatility.map(ParamSchedule::constant),
            jump: jump.map(ParamSchedule::constant),
            intensity: ParamSchedule::constant(intensity),
            rate: ParamSchedule::constant(rate),
            spot,
            maturity2,
            displacement: Displacement::Proportional,
        }
    }

    pub fn with_displacement(mut self, displacement: Displacement) -> Self {
        self.displacement = displacement;
        self
    }

    pub fn params(&self, t: f64) -> JumpParams {
        JumpParams {
            drift: [self.drift[0].eval(t), self.drift[1].eval(t)],
            volatility: [self.volatility[0].eval(t), self.volatility[1].eval(t)],
            jump: [self.jump[0].eval(t), self.jump[1].eval(t)],
            intensity: self.intensity.eval(t),
            rate: self.rate.eval(t),
        }
    }

    /// Coefficients at `t`, rejected if the two assets cannot span both risks.
    pub fn spanning_params(&self, t: f64) -> Result<JumpParams> {
        let p = self.params(t);
        check_params(&p, t)?;
        Ok(p)
    }

    /// Checks every coefficient on `[0, horizon]` at each schedule breakpoint.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        for (j, s) in self.spot.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::param(
                    ["spot1", "spot2"][j],
                    format!("must be positive, got {s}"),
                ));
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.maturity2 > horizon) {
            return Err(Error::param(
                "maturity2",
                format!(
                    "second asset must mature after the horizon {horizon}, got {}",
                    self.maturity2
                ),
            ));
        }
        let all = [
            &self.drift[0],
            &self.drift[1],
            &self.volatility[0],
            &self.volatility[1],
            &self.jump[0],
            &self.jump[1],
            &self.intensity,
            &self.rate,
        ];
        for t in breakpoints(&all, 0.0, horizon) {
            check_params(&self.params(t), t)?;
        }
        Ok(())
    }

    /// Claim arguments after one jump at `t`.
    pub fn displaced(&self, x: [f64; 2], t: f64) -> Result<[f64; 2]> {
        let g = [self.jump[0].eval(t), self.jump[1].eval(t)];
        let y = match self.displacement {
            Displacement::Proportional => [x[0] * (1.0 + g[0]), x[1] * (1.0 + g[1])],
            Displacement::Additive => [x[0] + g[0], x[1] + g[1]],
        };
        if y.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(y)
        } else {
            Err(Error::Domain {
                what: "displaced state",
                value: y[0].min(y[1]),
                lo: 0.0,
                hi: f64::INFINITY,
            })
        }
    }
}

fn check_params(p: &JumpParams, t: f64) -> Result<()> {
    for j in 0..2 {
        if !(p.volatility[j].is_finite() && p.volatility[j] > 0.0) {
            return Err(Error::param(
                ["volatility1", "volatility2"][j],
                format!("must be positive at t = {t}"),
            ));
        }
        if !(p.jump[j].is_finite() && p.jump[j] > -1.0) {
            return Err(Error::param(
                ["jump1", "jump2"][j],
                format!("must exceed -1 at t = {t}, got {}", p.jump[j]),
            ));
        }
        if !p.drift[j].is_finite() {
            return Err(Error::param(["drift1", "drift2"][j], "must be finite"));
        }
    }
    if !(p.intensity.is_finite() && p.intensity > 0.0) {
        return Err(Error::param(
            "intensity",
            format!("must be positive at t = {t}, got {}", p.intensity),
        ));
    }
    if !p.rate.is_finite() {
        return Err(Error::param("rate", "must be finite"));
    }
    let d = p.loading_det();
    if !(d.abs() >= SPANNING_EPS) {
        return Err(Error::ColinearLoadings {
            value: d.abs(),
            time: t,
        });
    }
    Ok(())
}

/// Poisson draw by inversion of one uniform, so that counts are monotone in the mean
/// for a fixed uniform.
pub(crate) fn poisson_inverse(mean: f64, u: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

pub(crate) fn poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    poisson_inverse(mean, rng.random::<f64>())
}
