use std::io::Write;

use serde::Serialize;

use super::fixed_point::{calibrate_gamma, CalibrationConfig, OptionSpec, Target};
use super::PriceSeries;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed};
use crate::schedule::RiskAversionSchedule;

/// Cell value for a failed or non-convergent calibration. Valid intensities are non-negative.
pub const SENTINEL: f64 = -1.0;

/// Values on a rectangular grid, `values[i][j]` at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGrid {
    pub x_name: &'static str,
    pub y_name: &'static str,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SurfaceGrid {
    pub fn header(&self) -> String {
        format!("{},{},value", self.x_name, self.y_name)
    }

    /// Long format, one row per cell, `x` varying slowest.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header())?;
        for (i, x) in self.x.iter().enumerate() {
            for (j, y) in self.y.iter().enumerate() {
                writeln!(out, "{x},{y},{}", self.values[i][j])?;
            }
        }
        Ok(())
    }
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::param(name, "grid must not be empty"));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(name, "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Exponential-family tilt `psi(tau)` over intensities and times to maturity, in days.
pub fn psi_surface(gammas: &[f64], tau_days: &[f64], horizon_days: f64) -> Result<SurfaceGrid> {
    check_axis("gamma", gammas)?;
    check_axis("tau_days", tau_days)?;
    let values = gammas
        .iter()
        .map(|&g| {
            let s = RiskAversionSchedule::exponential(g, horizon_days)?;
            tau_days.iter().map(|&t| s.psi(t)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(SurfaceGrid {
        x_name: "gamma",
        y_name: "tau_days",
        x: gammas.to_vec(),
        y: tau_days.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub moneyness: f64,
    pub maturity_days: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSurface {
    pub grid: SurfaceGrid,
    pub failures: Vec<CellFailure>,
    /// Rows where the intensity decreases with moneyness: `(maturity_days, moneyness_lo, moneyness_hi)`.
    pub monotonicity_violations: Vec<(usize, f64, f64)>,
}

impl GammaSurface {
    pub fn all_failed(&self) -> bool {
        self.failures.len() == self.grid.x.len() * self.grid.y.len()
    }
}

/// Calibrates every (moneyness, maturity) cell against the series' own history.
/// Cell `i` (row-major, moneyness slowest) uses seed `derive_seed(seed, i)`.
/// Failed or non-convergent cells hold [`SENTINEL`] and are listed, never aborting the grid.
pub fn gamma_surface(
    series: &PriceSeries,
    moneyness: &[f64],
    maturity_days: &[usize],
    config: &CalibrationConfig,
) -> Result<GammaSurface> {
    check_axis("moneyness", moneyness)?;
    let mats: Vec<f64> = maturity_days.iter().map(|&d| d as f64).collect();
    check_axis("maturity_days", &mats)?;
    let ny = maturity_days.len();
    let cells = map_indexed(moneyness.len() * ny, config.execution, |i| {
        let option = OptionSpec {
            moneyness: moneyness[i / ny],
            maturity_days: maturity_days[i % ny],
        };
        let cfg = CalibrationConfig {
            seed: derive_seed(config.seed, i as u64),
            ..*config
        };
        match calibrate_gamma(series, &option, &Target::Historical, &cfg) {
            Ok(r) if r.converged => Ok(r.gamma),
            Ok(r) => Err(format!(
                "no convergence after {} iterations (last gamma {})",
                r.iterations.len(),
                r.gamma
            )),
            Err(e) => Err(e.to_string()),
        }
    });
    let mut values = vec![vec![SENTINEL; ny]; moneyness.len()];
    let mut failures = Vec::new();
    for (i, c) in cells.into_iter().enumerate() {
        match c {
            Ok(g) => values[i / ny][i % ny] = g,
            Err(reason) => {
                log::warn!(
                    "gamma cell moneyness {} maturity {}d failed: {reason}",
                    moneyness[i / ny],
                    maturity_days[i % ny]
                );
                failures.push(CellFailure {
                    moneyness: moneyness[i / ny],
                    maturity_days: maturity_days[i % ny],
                    reason,
                });
            }
        }
    }
    let mut monotonicity_violations = Vec::new();
    for j in 0..ny {
        for i in 1..moneyness.len() {
            let (a, b) = (values[i - 1][j], values[i][j]);
            if a != SENTINEL && b != SENTINEL && b < a {
                log::info!(
                    "gamma decreases with moneyness at {}d: {} -> {}",
                    maturity_days[j],
                    moneyness[i - 1],
                    moneyness[i]
                );
                monotonicity_violations.push((maturity_days[j], moneyness[i - 1], moneyness[i]));
            }
        }
    }
    Ok(GammaSurface {
        grid: SurfaceGrid {
            x_name: "moneyness",
            y_name: "maturity_days",
            x: moneyness.to_vec(),
            y: mats,
            values,
        },
        failures,
        monotonicity_violations,
    })
}
