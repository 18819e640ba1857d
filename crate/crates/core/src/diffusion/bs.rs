use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// Value and partials; `theta` is the calendar-time derivative `dV/dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Greeks {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Black-Scholes value of a European option. At expiry the delta is the
/// indicator of being in the money, with one half at the strike.
pub fn bs_price(spot: f64, strike: f64, vol: f64, rate: f64, tau: f64, kind: OptionKind) -> Result<Greeks> {
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::param("spot", "must be positive"));
    }
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::param("strike", "must be positive"));
    }
    if !(vol > 0.0) {
        return Err(Error::param("volatility", "must be positive"));
    }
    if !(tau >= 0.0) {
        return Err(Error::param("tau", "must be non-negative"));
    }
    let sign = match kind {
        OptionKind::Call => 1.0,
        OptionKind::Put => -1.0,
    };
    if tau == 0.0 {
        let itm = sign * (spot - strike);
        let delta = if itm > 0.0 {
            sign
        } else if itm == 0.0 {
            0.5 * sign
        } else {
            0.0
        };
        return Ok(Greeks {
            value: itm.max(0.0),
            delta,
            gamma: 0.0,
            theta: 0.0,
        });
    }
    let sq = tau.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * tau) / (vol * sq);
    let d2 = d1 - vol * sq;
    let disc_k = strike * (-rate * tau).exp();
    let pdf = norm_pdf(d1);
    let value = sign * (spot * norm_cdf(sign * d1) - disc_k * norm_cdf(sign * d2));
    Ok(Greeks {
        value,
        delta: sign * norm_cdf(sign * d1),
        gamma: pdf / (spot * vol * sq),
        theta: -spot * pdf * vol / (2.0 * sq) - sign * rate * disc_k * norm_cdf(sign * d2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_call() {
        let g = bs_price(100.0, 100.0, 0.2, 0.01, 1.0, OptionKind::Call).unwrap();
        assert!((g.value - 8.433_318_690_109_608).abs() < 1e-10);
        assert!((g.delta - 0.559_617_692_370_242_5).abs() < 1e-12);
    }

    #[test]
    fn expiry_conventions() {
        let g = bs_price(120.0, 100.0, 0.2, 0.01, 0.0, OptionKind::Call).unwrap();
        assert_eq!((g.value, g.delta), (20.0, 1.0));
        assert_eq!(
            bs_price(100.0, 100.0, 0.2, 0.01, 0.0, OptionKind::Call).unwrap().delta,
            0.5
        );
        assert_eq!(
            bs_price(80.0, 100.0, 0.2, 0.01, 0.0, OptionKind::Put).unwrap().delta,
            -1.0
        );
    }

    proptest! {
        #[test]
        fn put_call_parity(s in 20.0..300.0f64, k in 20.0..300.0f64, v in 0.05..0.8f64, r in 0.0..0.1f64, t in 0.01..3.0f64) {
            let c = bs_price(s, k, v, r, t, OptionKind::Call).unwrap();
            let p = bs_price(s, k, v, r, t, OptionKind::Put).unwrap();
            let fwd = s - k * (-r * t).exp();
            prop_assert!((c.value - p.value - fwd).abs() <= 1e-10 * s.max(k));
            prop_assert!((c.delta - p.delta - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn satisfies_the_pricing_equation(s in 50.0..200.0f64, v in 0.1..0.5f64, r in 0.0..0.1f64, t in 0.05..2.0f64) {
            let g = bs_price(s, 100.0, v, r, t, OptionKind::Call).unwrap();
            let lhs = g.theta + r * s * g.delta + 0.5 * v * v * s * s * g.gamma - r * g.value;
            prop_assert!(lhs.abs() < 1e-9 * (1.0 + g.value));
        }
    }
}
