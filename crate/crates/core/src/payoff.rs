use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Terminal payoff `G(S_T)` of a single-asset European claim.
#[derive(Clone)]
pub enum Payoff {
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    /// Pays a fixed amount regardless of the terminal state.
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Call { strike } => write!(f, "Call({strike})"),
            Payoff::Put { strike } => write!(f, "Put({strike})"),
            Payoff::Constant(c) => write!(f, "Constant({c})"),
            Payoff::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Payoff {
    pub fn call(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::Call { strike })
    }

    pub fn put(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::Put { strike })
    }

    pub fn constant(amount: f64) -> Result<Self> {
        if !(amount.is_finite() && amount >= 0.0) {
            return Err(Error::InvalidPayoff(format!(
                "constant payoff {amount} must be non-negative"
            )));
        }
        Ok(Payoff::Constant(amount))
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Payoff::Custom(Arc::new(f))
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Call { strike } | Payoff::Put { strike } => Some(strike),
            _ => None,
        }
    }

    pub fn eval(&self, spot: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (spot - strike).max(0.0),
            Payoff::Put { strike } => (strike - spot).max(0.0),
            Payoff::Constant(c) => *c,
            Payoff::Custom(f) => f(spot),
        }
    }

    /// Evaluates and rejects negative or non-finite values from custom payoffs.
    pub fn eval_checked(&self, spot: f64) -> Result<f64> {
        let v = self.eval(spot);
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidPayoff(format!("G({spot}) = {v}")))
        }
    }
}

fn check_strike(strike: f64) -> Result<()> {
    if strike.is_finite() && strike >= 0.0 {
        Ok(())
    } else {
        Err(Error::param("strike", format!("must be non-negative, got {strike}")))
    }
}
