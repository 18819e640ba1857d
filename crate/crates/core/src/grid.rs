use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform hedging grid `t_k = k h`, `k = 0..=n`, with `n h = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    /// Time to maturity at step `k`; exactly zero at `k = n`.
    pub fn tau(&self, k: usize) -> f64 {
        (self.n_steps.saturating_sub(k)) as f64 * self.step()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_times_n_is_horizon() {
        let g = TimeGrid::new(160, 160.0 / 252.0).unwrap();
        let back = g.step() * g.n_steps() as f64;
        assert!((back - g.horizon()).abs() <= 1e-12 * g.horizon());
        assert_eq!(g.tau(160), 0.0);
        assert_eq!(g.time(160), g.horizon());
        assert!(g.tau(3) > g.tau(4));
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(TimeGrid::new(0, 1.0).is_err());
        assert!(TimeGrid::new(10, 0.0).is_err());
    }
}
