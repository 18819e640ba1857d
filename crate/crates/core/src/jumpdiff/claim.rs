use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{poisson, JumpModel};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, stream, Execution, Purpose};
use crate::market::breakpoints;
use crate::stats::Moments;

/// Value, partials and jump-displaced value of a claim at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClaimQuote {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    /// Value at the state reached after one jump.
    pub displaced: f64,
}

/// A European claim on both assets, valued consistently with a [`JumpModel`].
pub trait TwoAssetClaim: Send + Sync {
    fn horizon(&self) -> f64;
    fn terminal(&self, x: [f64; 2]) -> Result<f64>;
    fn quote(&self, model: &JumpModel, x: [f64; 2], t: f64) -> Result<ClaimQuote>;

    fn value(&self, model: &JumpModel, x: [f64; 2], t: f64) -> Result<f64> {
        Ok(self.quote(model, x, t)?.value)
    }
}

/// `scale * x1^a * x2^b`, priced in closed form under the risk-neutral dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonomialClaim {
    pub scale: f64,
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
}

impl MonomialClaim {
    pub fn new(scale: f64, a: f64, b: f64, horizon: f64) -> Self {
        Self { scale, a, b, horizon }
    }

    /// `V(x, t) / G(x)`: the exponential of the integrated risk-neutral growth of the monomial
    /// net of discounting.
    fn growth(&self, model: &JumpModel, t: f64) -> f64 {
        let s = [
            &model.volatility[0],
            &model.volatility[1],
            &model.jump[0],
            &model.jump[1],
            &model.intensity,
            &model.rate,
        ];
        let pts = breakpoints(&s, t, self.horizon);
        let (a, b) = (self.a, self.b);
        let mut exponent = 0.0;
        for w in pts.windows(2) {
            let p = model.params(w[0]);
            let (s1, s2) = (p.volatility[0], p.volatility[1]);
            let (g1, g2) = (p.jump[0], p.jump[1]);
            let lam = p.intensity;
            let drift = a * (p.rate - lam * g1 - 0.5 * s1 * s1) + b * (p.rate - lam * g2 - 0.5 * s2 * s2);
            let diffusion = 0.5 * (a * s1 + b * s2).powi(2);
            let jumps = lam * ((1.0 + g1).powf(a) * (1.0 + g2).powf(b) - 1.0);
            exponent += (drift + diffusion + jumps - p.rate) * (w[1] - w[0]);
        }
        exponent.exp()
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.scale * x[0].powf(self.a) * x[1].powf(self.b)
    }
}

impl TwoAssetClaim for MonomialClaim {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn terminal(&self, x: [f64; 2]) -> Result<f64> {
        finite(self.eval(x), "monomial claim")
    }

    fn quote(&self, model: &JumpModel, x: [f64; 2], t: f64) -> Result<ClaimQuote> {
        let g = self.growth(model, t);
        let value = finite(g * self.eval(x), "monomial claim")?;
        let y = model.displaced(x, t)?;
        Ok(ClaimQuote {
            value,
            d1: self.a * value / x[0],
            d2: self.b * value / x[1],
            displaced: g * self.eval(y),
        })
    }
}

fn finite(x: f64, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Terminal payoff on two assets.
#[derive(Clone)]
pub enum JumpPayoff {
    CallOnFirst {
        strike: f64,
    },
    PutOnFirst {
        strike: f64,
    },
    /// `max(x1 - x2, 0)`.
    Exchange,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for JumpPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpPayoff::CallOnFirst { strike } => write!(f, "CallOnFirst({strike})"),
            JumpPayoff::PutOnFirst { strike } => write!(f, "PutOnFirst({strike})"),
            JumpPayoff::Exchange => write!(f, "Exchange"),
            JumpPayoff::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl JumpPayoff {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        JumpPayoff::Custom(Arc::new(f))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpPayoff::CallOnFirst { strike } | JumpPayoff::PutOnFirst { strike }
                if !(strike.is_finite() && strike > 0.0) =>
            {
                Err(Error::param("strike", format!("must be positive, got {strike}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        let v = match self {
            JumpPayoff::CallOnFirst { strike } => (x1 - strike).max(0.0),
            JumpPayoff::PutOnFirst { strike } => (strike - x1).max(0.0),
            JumpPayoff::Exchange => (x1 - x2).max(0.0),
            JumpPayoff::Custom(f) => f(x1, x2),
        };
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidPayoff(format!("payoff {v} at ({x1}, {x2})")))
        }
    }
}

/// Risk-neutral Monte-Carlo settings for two-asset claims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPricing {
    pub n_paths: usize,
    /// Time steps from the valuation time to maturity.
    pub n_steps: usize,
    pub seed: u64,
    /// Relative spot bump for the central-difference partials.
    pub bump: f64,
    pub execution: Execution,
}

impl JumpPricing {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            bump: 0.01,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        if !(self.bump > 0.0 && self.bump < 1.0) {
            return Err(Error::param(
                "bump",
                format!("relative bump must lie in (0, 1), got {}", self.bump),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpPrice {
    pub quote: ClaimQuote,
    pub std_error: f64,
}

/// Base, asset 1 up/down, asset 2 up/down, displaced.
const SLOTS: usize = 6;

/// Monte-Carlo value under the martingale measure with jump intensity unchanged.
///
/// Both assets are linear in their starting values along a path, so every
/// bumped and displaced revaluation is an exact rescaling of the base path.
pub fn jump_price(
    model: &JumpModel,
    payoff: &JumpPayoff,
    pricing: &JumpPricing,
    state: [f64; 2],
    t: f64,
    horizon: f64,
) -> Result<JumpPrice> {
    model.validate(horizon)?;
    pricing.validate()?;
    payoff.validate()?;
    if !(t >= 0.0 && t < horizon) {
        return Err(Error::Domain {
            what: "valuation time",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    if !state.iter().all(|x| x.is_finite() && *x > 0.0) {
        return Err(Error::param("state", "spots must be positive"));
    }
    let y = model.displaced(state, t)?;
    let b = pricing.bump;
    let scales: [[f64; 2]; SLOTS] = [
        [1.0, 1.0],
        [1.0 + b, 1.0],
        [1.0 - b, 1.0],
        [1.0, 1.0 + b],
        [1.0, 1.0 - b],
        [y[0] / state[0], y[1] / state[1]],
    ];
    let discount = (-model.rate.integrate(t, horizon)).exp();
    let n = pricing.n_steps;
    let dt = (horizon - t) / n as f64;
    let sq = dt.sqrt();
    let chunks = map_chunks(
        pricing.n_paths,
        pricing.execution,
        |range| -> Result<[Moments; SLOTS]> {
            let mut acc = [Moments::default(); SLOTS];
            for i in range {
                let mut rng = stream(pricing.seed, Purpose::JumpPricing, i as u64);
                let mut log = [0.0f64; 2];
                for j in 0..n {
                    let s = t + j as f64 * dt;
                    let p = model.params(s);
                    let z: f64 = rng.sample(StandardNormal);
                    let jumps = poisson(model.intensity.integrate(s, s + dt), &mut rng) as f64;
                    for (k, l) in log.iter_mut().enumerate() {
                        let (sig, g) = (p.volatility[k], p.jump[k]);
                        *l += (p.rate - p.intensity * g - 0.5 * sig * sig) * dt + sig * sq * z + jumps * g.ln_1p();
                    }
                }
                let end = [state[0] * log[0].exp(), state[1] * log[1].exp()];
                for (a, k) in acc.iter_mut().zip(scales) {
                    a.push(discount * payoff.eval(end[0] * k[0], end[1] * k[1])?);
                }
            }
            Ok(acc)
        },
    );
    let mut acc = [Moments::default(); SLOTS];
    for c in chunks {
        for (a, b) in acc.iter_mut().zip(c?.iter()) {
            a.merge(b);
        }
    }
    Ok(JumpPrice {
        quote: ClaimQuote {
            value: acc[0].mean,
            d1: (acc[1].mean - acc[2].mean) / (2.0 * b * state[0]),
            d2: (acc[3].mean - acc[4].mean) / (2.0 * b * state[1]),
            displaced: acc[5].mean,
        },
        std_error: acc[0].std_error(),
    })
}

/// A payoff priced by [`jump_price`] with a fixed seed, so quotes are a
/// deterministic function of the state.
#[derive(Debug, Clone)]
pub struct McClaim {
    pub payoff: JumpPayoff,
    /// `n_steps` refers to the full horizon and is prorated to the remaining time.
    pub pricing: JumpPricing,
    pub horizon: f64,
}

impl TwoAssetClaim for McClaim {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn terminal(&self, x: [f64; 2]) -> Result<f64> {
        self.payoff.eval(x[0], x[1])
    }

    fn quote(&self, model: &JumpModel, x: [f64; 2], t: f64) -> Result<ClaimQuote> {
        let steps = ((self.pricing.n_steps as f64 * (self.horizon - t) / self.horizon).ceil() as usize).max(1);
        let pricing = JumpPricing {
            n_steps: steps,
            ..self.pricing
        };
        Ok(jump_price(model, &self.payoff, &pricing, x, t, self.horizon)?.quote)
    }
}
