//! Estimation of the up-probability and return moments from a price series,
//! the risk-aversion intensity fixed point and its surfaces.

mod fixed_point;
mod surface;

pub use fixed_point::{
    calibrate_gamma, calibration_lattice, CalibrationConfig, CalibrationResult, IterationRecord, OptionSpec, PathModel,
    PsiPoint, ResidualPanel, SolverParams, Target,
};
pub use surface::{gamma_surface, psi_surface, CellFailure, GammaSurface, SurfaceGrid, SENTINEL};

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{stream, Purpose};
use crate::stats::Moments;

pub const TRADING_DAYS: f64 = 252.0;
pub const MIN_OBSERVATIONS: usize = 30;
pub const MIN_RESIDUALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceObservation {
    pub date: NaiveDate,
    pub close: f64,
}

/// Daily closes with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    observations: Vec<PriceObservation>,
}

impl PriceSeries {
    pub fn new(observations: Vec<PriceObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InsufficientObservations {
                got: 0,
                need: MIN_OBSERVATIONS,
            });
        }
        for (i, o) in observations.iter().enumerate() {
            if !(o.close.is_finite() && o.close > 0.0) {
                return Err(Error::Input(format!(
                    "close on {} must be positive, got {}",
                    o.date, o.close
                )));
            }
            if i > 0 && o.date <= observations[i - 1].date {
                return Err(Error::Input(format!("dates must be strictly increasing at {}", o.date)));
            }
        }
        Ok(Self { observations })
    }

    /// Reads a `date,close` CSV with ISO dates.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Input(format!("price csv: {e}")))?
            .clone();
        if headers.len() < 2 || &headers[0] != "date" || &headers[1] != "close" {
            return Err(Error::Input(format!(
                "price csv must have header `date,close`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut obs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(format!("price csv: {e}")))?;
            let row = line + 2;
            let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or(""), "%Y-%m-%d")
                .map_err(|e| Error::Input(format!("row {row}: bad date: {e}")))?;
            let close: f64 = rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Input(format!("row {row}: bad close: {e}")))?;
            obs.push(PriceObservation { date, close });
        }
        Self::new(obs)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(std::io::BufReader::new(f))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "date,close")?;
        for o in &self.observations {
            writeln!(out, "{},{}", o.date.format("%Y-%m-%d"), o.close)?;
        }
        Ok(())
    }

    /// Geometric Brownian motion sampled on weekdays from `start`.
    pub fn synthetic_gbm(
        spot: f64,
        drift: f64,
        volatility: f64,
        n_obs: usize,
        seed: u64,
        start: NaiveDate,
    ) -> Result<Self> {
        if !(spot > 0.0 && volatility > 0.0 && drift.is_finite()) {
            return Err(Error::param("synthetic", "spot and volatility must be positive"));
        }
        let h = 1.0 / TRADING_DAYS;
        let mut rng = stream(seed, Purpose::Synthetic, 0);
        let mut date = start;
        let mut s = spot;
        let mut obs = Vec::with_capacity(n_obs);
        for i in 0..n_obs {
            while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
                date = date + Days::new(1);
            }
            if i > 0 {
                let z: f64 = rng.sample(StandardNormal);
                s *= ((drift - 0.5 * volatility * volatility) * h + volatility * h.sqrt() * z).exp();
            }
            obs.push(PriceObservation { date, close: s });
            date = date + Days::new(1);
        }
        Self::new(obs)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[PriceObservation] {
        &self.observations
    }

    pub fn closes(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.close)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.observations
                .iter()
                .map(|o| PriceObservation {
                    date: o.date,
                    close: o.close * factor,
                })
                .collect(),
        )
    }
}

/// Up-probability and annualised log-return moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhEstimate {
    pub p_hat: f64,
    /// Mean daily log return times 252.
    pub mu_hat: f64,
    /// Sample standard deviation of daily log returns times sqrt(252).
    pub sigma_hat: f64,
    pub n_returns: usize,
}

pub fn estimate_ph(series: &PriceSeries) -> Result<PhEstimate> {
    if series.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientObservations {
            got: series.len(),
            need: MIN_OBSERVATIONS,
        });
    }
    let closes: Vec<f64> = series.closes().collect();
    let mut m = Moments::default();
    let mut ups = 0usize;
    for w in closes.windows(2) {
        let r = (w[1] / w[0]).ln();
        if r > 0.0 {
            ups += 1;
        }
        m.push(r);
    }
    let n = closes.len() - 1;
    let p_hat = ups as f64 / n as f64;
    if m.variance() == 0.0 {
        return Err(Error::ZeroVariance);
    }
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(Error::DegenerateUpProbability(p_hat));
    }
    Ok(PhEstimate {
        p_hat,
        mu_hat: m.mean * TRADING_DAYS,
        sigma_hat: m.std() * TRADING_DAYS.sqrt(),
        n_returns: n,
    })
}

/// Maximum-likelihood normal fit: sample mean and divide-by-`n` standard deviation.
pub fn fit_residual_normal(residuals: &[f64]) -> Result<(f64, f64)> {
    if residuals.len() < MIN_RESIDUALS {
        return Err(Error::InsufficientObservations {
            got: residuals.len(),
            need: MIN_RESIDUALS,
        });
    }
    if residuals.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("residual sample"));
    }
    let m = Moments::from_slice(residuals);
    Ok((m.mean, m.variance_mle().sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Normal;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + Days::new(i)
    }

    fn series(closes: &[f64]) -> PriceSeries {
        PriceSeries::new(
            closes
                .iter()
                .enumerate()
                .map(|(i, &c)| PriceObservation {
                    date: day(i as u64),
                    close: c,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn increasing_series_is_degenerate() {
        let s = series(&(0..40).map(|i| 100.0 + i as f64).collect::<Vec<_>>());
        assert_eq!(estimate_ph(&s), Err(Error::DegenerateUpProbability(1.0)));
    }

    #[test]
    fn alternating_series() {
        let mut c = vec![100.0];
        for i in 0..60 {
            let last = *c.last().unwrap();
            c.push(last * if i % 2 == 0 { 1.01 } else { 0.99 });
        }
        let e = estimate_ph(&series(&c)).unwrap();
        assert_eq!(e.p_hat, 0.5);
        let mean = 0.5 * (1.01f64.ln() + 0.99f64.ln()) * 252.0;
        assert!((e.mu_hat - mean).abs() < 1e-12);
        assert!((e.mu_hat + 0.0126).abs() < 1e-4);
        assert!((e.sigma_hat - 0.01 * 252f64.sqrt()).abs() < 0.002);
    }

    #[test]
    fn too_short_and_flat() {
        assert!(matches!(
            estimate_ph(&series(&[100.0; 10])),
            Err(Error::InsufficientObservations { got: 10, need: 30 })
        ));
        assert_eq!(estimate_ph(&series(&[100.0; 40])), Err(Error::ZeroVariance));
    }

    #[test]
    fn gbm_estimates_within_standard_errors() {
        let s = PriceSeries::synthetic_gbm(100.0, 0.08, 0.2, 2521, 17, day(0)).unwrap();
        let e = estimate_ph(&s).unwrap();
        let years = e.n_returns as f64 / 252.0;
        let log_drift = 0.08 - 0.02;
        assert!((e.mu_hat - log_drift).abs() < 3.0 * 0.2 / years.sqrt(), "{e:?}");
        assert!(
            (e.sigma_hat - 0.2).abs() < 3.0 * 0.2 / (2.0 * e.n_returns as f64).sqrt(),
            "{e:?}"
        );
    }

    #[test]
    fn estimates_are_scale_invariant() {
        let s = PriceSeries::synthetic_gbm(100.0, 0.08, 0.2, 300, 3, day(0)).unwrap();
        let a = estimate_ph(&s).unwrap();
        let b = estimate_ph(&s.scaled(7.5).unwrap()).unwrap();
        assert_eq!(a.p_hat, b.p_hat);
        assert!((a.mu_hat - b.mu_hat).abs() < 1e-12 && (a.sigma_hat - b.sigma_hat).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = PriceSeries::synthetic_gbm(50.0, 0.05, 0.3, 40, 1, day(3)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = PriceSeries::from_csv_reader(&buf[..]).unwrap();
        assert_eq!(back.len(), 40);
        for (a, b) in s.observations().iter().zip(back.observations()) {
            assert_eq!(a.date, b.date);
            assert!((a.close - b.close).abs() <= 1e-12 * a.close);
        }
        assert!(PriceSeries::from_csv_reader("day,price\n2020-01-01,1\n".as_bytes()).is_err());
        assert!(PriceSeries::from_csv_reader("date,close\n2020-01-02,1\n2020-01-01,2\n".as_bytes()).is_err());
        assert!(PriceSeries::from_csv_reader("date,close\n2020-13-01,1\n".as_bytes()).is_err());
        assert!(PriceSeries::from_csv_reader("date,close\n2020-01-01,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn normal_fit() {
        assert_eq!(fit_residual_normal(&[0.0; 150]).unwrap(), (0.0, 0.0));
        assert!(fit_residual_normal(&[0.0; 99]).is_err());
        let mut rng = stream(5, Purpose::Synthetic, 1);
        let d = Normal::new(0.5, 2.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(d)).collect();
        let (m, s) = fit_residual_normal(&xs).unwrap();
        let n = xs.len() as f64;
        assert!((m - 0.5).abs() < 3.0 * 2.0 / n.sqrt());
        assert!((s - 2.0).abs() < 3.0 * 2.0 / (2.0 * n).sqrt());
        let naive_mean = xs.iter().sum::<f64>() / n;
        let naive_std = (xs.iter().map(|x| (x - naive_mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((m - naive_mean).abs() < 1e-12 && (s - naive_std).abs() < 1e-12);
    }
}
