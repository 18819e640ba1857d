//! Stochastic-volatility and vol-of-vol engines: optimal holdings in the
//! asset and its volatility factors, Monte-Carlo prices and hedging.

mod hedge;
mod holdings;
mod mc;

pub use hedge::simulate_hedge_multifactor;
pub use holdings::{
    sv_holdings, sv_risk_premium, sv_tilt_excess_drift, vov_determinants, vov_holdings, vov_tilt_excess_drift,
    Determinants,
};
pub use mc::{mc_price_and_partials, McPrice, McPricing};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::ParamSchedule;

/// Maps a factor state to a volatility level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFn {
    Sqrt,
    Power {
        exponent: f64,
    },
    /// Natural log; only defined for states above 1 so that it stays positive.
    Log,
    /// Ignores the state. Useful for degenerate and cross-model checks.
    Constant {
        value: f64,
    },
}

impl StateFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StateFn::Power { exponent } if !(exponent > 0.0 && exponent < 1.0) => Err(Error::param(
                "exponent",
                format!("power exponent must lie in (0, 1), got {exponent}"),
            )),
            StateFn::Constant { value } if !(value > 0.0) => {
                Err(Error::param("value", "constant level must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let y = match *self {
            StateFn::Sqrt => x.sqrt(),
            StateFn::Power { exponent } => x.powf(exponent),
            StateFn::Log => {
                if !(x > 1.0) {
                    return Err(Error::Domain {
                        what: "log state",
                        value: x,
                        lo: 1.0,
                        hi: f64::INFINITY,
                    });
                }
                x.ln()
            }
            StateFn::Constant { value } => value,
        };
        if y.is_finite() && y > 0.0 {
            Ok(y)
        } else {
            Err(Error::NonFinite("state function"))
        }
    }
}

pub const MAX_ABS_CORRELATION: f64 = 0.999;
pub const MIN_CORRELATION_DET: f64 = 1e-6;

/// `dS = mu S dt + h(v) S dB`, `dv = alpha v dt + beta v dB_v`, `dB dB_v = rho dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvModel {
    pub drift: ParamSchedule,
    pub vol_drift: ParamSchedule,
    pub vol_vol: ParamSchedule,
    pub rate: ParamSchedule,
    pub rho: f64,
    pub h: StateFn,
    pub spot: f64,
    pub vol_state: f64,
}

/// Adds `dw = gamma w dt + delta w dB_w` driving the volatility of `v` through `g(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VovModel {
    pub drift: ParamSchedule,
    pub vol_drift: ParamSchedule,
    pub vov_drift: ParamSchedule,
    pub vov_vol: ParamSchedule,
    pub rate: ParamSchedule,
    pub rho_v: f64,
    pub rho_w: f64,
    pub rho_vw: f64,
    pub h: StateFn,
    pub g: StateFn,
    pub spot: f64,
    pub vol_state: f64,
    pub vov_state: f64,
    pub dc_form: DcForm,
}

/// Third-factor determinant: the reference form scales the asset entry by `1 - C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcForm {
    #[default]
    Consistent,
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultifactorModel {
    Sv(SvModel),
    Vov(VovModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorState {
    pub spot: f64,
    pub vol: f64,
    /// Ignored by the two-factor model.
    pub vov: f64,
}

fn check_positive(field: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {x}")))
    }
}

fn check_rho(field: &'static str, rho: f64) -> Result<()> {
    if rho.abs() <= MAX_ABS_CORRELATION {
        Ok(())
    } else {
        Err(Error::NearSingularCorrelation(format!(
            "|{field}| = {} exceeds {MAX_ABS_CORRELATION}",
            rho.abs()
        )))
    }
}

impl SvModel {
    pub fn validate(&self) -> Result<()> {
        check_rho("rho", self.rho)?;
        check_positive("spot", self.spot)?;
        check_positive("vol_state", self.vol_state)?;
        self.h.validate()?;
        self.h.eval(self.vol_state)?;
        if self.vol_vol.values().any(|b| !(b >= 0.0)) {
            return Err(Error::param("vol_vol", "must be non-negative"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> FactorState {
        FactorState {
            spot: self.spot,
            vol: self.vol_state,
            vov: 0.0,
        }
    }
}

impl VovModel {
    pub fn correlation(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rho_v, self.rho_w],
            [self.rho_v, 1.0, self.rho_vw],
            [self.rho_w, self.rho_vw, 1.0],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        check_rho("rho_v", self.rho_v)?;
        check_rho("rho_w", self.rho_w)?;
        check_rho("rho_vw", self.rho_vw)?;
        let d = det3(&self.correlation());
        if !(d > MIN_CORRELATION_DET) {
            return Err(Error::NearSingularCorrelation(format!("correlation determinant {d:e}")));
        }
        check_positive("spot", self.spot)?;
        check_positive("vol_state", self.vol_state)?;
        check_positive("vov_state", self.vov_state)?;
        self.h.validate()?;
        self.g.validate()?;
        self.h.eval(self.vol_state)?;
        self.g.eval(self.vov_state)?;
        if self.vov_vol.values().any(|d| !(d > 0.0)) {
            return Err(Error::param("vov_vol", "must be positive"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> FactorState {
        FactorState {
            spot: self.spot,
            vol: self.vol_state,
            vov: self.vov_state,
        }
    }
}

impl MultifactorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MultifactorModel::Sv(m) => m.validate(),
            MultifactorModel::Vov(m) => m.validate(),
        }
    }

    pub fn rate(&self) -> &ParamSchedule {
        match self {
            MultifactorModel::Sv(m) => &m.rate,
            MultifactorModel::Vov(m) => &m.rate,
        }
    }

    pub fn initial_state(&self) -> FactorState {
        match self {
            MultifactorModel::Sv(m) => m.initial_state(),
            MultifactorModel::Vov(m) => m.initial_state(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            MultifactorModel::Sv(_) => "sv",
            MultifactorModel::Vov(_) => "vov",
        }
    }
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Lower Cholesky factor of a positive-definite 3x3 matrix.
pub(crate) fn cholesky3(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::NearSingularCorrelation(
                        "correlation matrix not positive definite".into(),
                    ));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_functions() {
        assert_eq!(StateFn::Sqrt.eval(0.04).unwrap(), 0.2);
        assert!(StateFn::Log.eval(0.5).is_err());
        assert!(StateFn::Power { exponent: 1.5 }.validate().is_err());
        assert!((StateFn::Power { exponent: 0.5 }.eval(0.09).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = [[1.0, 0.5, 0.3], [0.5, 1.0, 0.2], [0.3, 0.2, 1.0]];
        let l = cholesky3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - m[i][j]).abs() < 1e-15);
            }
        }
        assert!(cholesky3(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }
}
