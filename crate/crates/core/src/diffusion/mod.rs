//! Continuous-time single-asset engine: closed-form and finite-difference
//! valuation, the tilted delta, and hedging along simulated paths.

mod bs;
mod hedge;
mod pde;

pub use bs::{bs_price, Greeks, OptionKind};
pub use hedge::{delta_from_risk_aversion, delta_optimal_diffusion, simulate_hedge_diffusion};
pub use pde::{pde_price_grid, PdeGrid, PricingSurface, SurfacePoint};

use crate::error::{Error, Result};
use crate::market::{breakpoints, ParamSchedule};

/// Log-normal asset with piecewise-constant drift, volatility and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub drift: ParamSchedule,
    pub volatility: ParamSchedule,
    pub rate: ParamSchedule,
    pub spot: f64,
}

impl DiffusionModel {
    pub fn new(drift: ParamSchedule, volatility: ParamSchedule, rate: ParamSchedule, spot: f64) -> Result<Self> {
        let m = Self {
            drift,
            volatility,
            rate,
            spot,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn constant(drift: f64, volatility: f64, rate: f64, spot: f64) -> Result<Self> {
        Self::new(
            ParamSchedule::constant(drift),
            ParamSchedule::constant(volatility),
            ParamSchedule::constant(rate),
            spot,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::param("spot", "must be positive"));
        }
        let last = [&self.drift, &self.volatility, &self.rate]
            .iter()
            .flat_map(|s| s.knots().iter().map(|k| k.0))
            .fold(0.0, f64::max);
        for t in breakpoints(&[&self.drift, &self.volatility, &self.rate], 0.0, last + 1.0) {
            let (mu, sigma, r) = (self.drift.eval(t), self.volatility.eval(t), self.rate.eval(t));
            if !(sigma > 0.0) {
                return Err(Error::param(
                    "volatility",
                    format!("must be positive, got {sigma} at t = {t}"),
                ));
            }
            if !(r > 0.0) {
                return Err(Error::param("rate", format!("must be positive, got {r} at t = {t}")));
            }
            if !(mu > r) {
                return Err(Error::param("drift", format!("must exceed the rate at t = {t}")));
            }
        }
        Ok(())
    }

    /// `int_a^b sigma(s)^2 ds`.
    pub fn integrated_variance(&self, a: f64, b: f64) -> f64 {
        breakpoints(&[&self.volatility], a, b)
            .windows(2)
            .map(|w| self.volatility.eval(w[0]).powi(2) * (w[1] - w[0]))
            .sum()
    }
}
