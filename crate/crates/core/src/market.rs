use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant single-asset market: drift, volatility, riskless rate and spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub drift: f64,
    pub volatility: f64,
    pub rate: f64,
    pub spot: f64,
    pub numeraire_start: f64,
}

impl MarketParams {
    pub fn new(drift: f64, volatility: f64, rate: f64, spot: f64) -> Result<Self> {
        let m = Self {
            drift,
            volatility,
            rate,
            spot,
            numeraire_start: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volatility.is_finite() && self.volatility > 0.0) {
            return Err(Error::param(
                "volatility",
                format!("must be positive, got {}", self.volatility),
            ));
        }
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::param("spot", format!("must be positive, got {}", self.spot)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::param("rate", format!("must be positive, got {}", self.rate)));
        }
        if !(self.drift.is_finite() && self.drift > self.rate) {
            return Err(Error::param(
                "drift",
                format!("must exceed the riskless rate {}, got {}", self.rate, self.drift),
            ));
        }
        if !(self.numeraire_start.is_finite() && self.numeraire_start > 0.0) {
            return Err(Error::param("numeraire_start", "must be positive"));
        }
        Ok(())
    }
}

/// Piecewise-constant schedule: the value of the last knot at or before `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    knots: Vec<(f64, f64)>,
}

impl ParamSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![(0.0, value)],
        }
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        match knots.first() {
            None => return Err(Error::param("knots", "schedule needs at least one knot")),
            Some(&(t0, _)) if t0 != 0.0 => return Err(Error::param("knots", "first knot must sit at time 0")),
            _ => {}
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("knots", "knot times must be strictly increasing"));
        }
        if knots.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::param("knots", "knots must be finite"));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&(kt, _)| kt <= t);
        self.knots[idx.saturating_sub(1)].1
    }

    pub fn is_constant(&self) -> bool {
        self.knots.len() == 1
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|&(_, v)| v)
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        for (i, &(t0, v)) in self.knots.iter().enumerate() {
            let t1 = self.knots.get(i + 1).map_or(f64::INFINITY, |k| k.0);
            let lo = a.max(t0);
            let hi = b.min(t1);
            if hi > lo {
                total += v * (hi - lo);
            }
        }
        total
    }
}

/// Sorted union of knot times of several schedules, clipped to `[a, b]`, with both ends.
pub(crate) fn breakpoints(schedules: &[&ParamSchedule], a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![a, b];
    for s in schedules {
        pts.extend(s.knots().iter().map(|k| k.0).filter(|&t| t > a && t < b));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_lookup_and_integral() {
        let s = ParamSchedule::new(vec![(0.0, 0.01), (0.5, 0.03)]).unwrap();
        assert_eq!(s.eval(0.0), 0.01);
        assert_eq!(s.eval(0.49), 0.01);
        assert_eq!(s.eval(0.5), 0.03);
        assert_eq!(s.eval(2.0), 0.03);
        assert!((s.integrate(0.25, 1.0) - (0.25 * 0.01 + 0.5 * 0.03)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(ParamSchedule::new(vec![]).is_err());
        assert!(ParamSchedule::new(vec![(0.1, 1.0)]).is_err());
        assert!(ParamSchedule::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn market_validation_names_field() {
        let e = MarketParams::new(0.08, -0.2, 0.01, 100.0).unwrap_err();
        assert!(e.to_string().contains("volatility"));
        assert!(MarketParams::new(0.01, 0.2, 0.02, 100.0).is_err());
    }
}
