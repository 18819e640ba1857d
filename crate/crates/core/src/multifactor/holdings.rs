use serde::Serialize;

use super::{det3, DcForm, FactorState, SvModel, VovModel};
use crate::error::{Error, Result};
use crate::schedule::RiskAversion;

pub(super) fn sv_adjust(model: &SvModel, state: &FactorState, risk: RiskAversion, t: f64) -> Result<(f64, f64)> {
    model.validate()?;
    let inv_r = risk.inverse();
    if inv_r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (mu, alpha, beta) = (model.drift.eval(t), model.vol_drift.eval(t), model.vol_vol.eval(t));
    if !(beta > 0.0) {
        return Err(Error::param("vol_vol", "must be positive for finite risk aversion"));
    }
    let h = model.h.eval(state.vol)?;
    let (s, v, rho) = (state.spot, state.vol, model.rho);
    let k = 1.0 / (1.0 - rho * rho);
    let a = inv_r * (k * mu / (2.0 * h * h * s) - rho * k * alpha / (2.0 * beta * h * s));
    let b = inv_r * (k * alpha / (2.0 * beta * beta * v) - rho * k * mu / (2.0 * h * beta * v));
    Ok((a, b))
}

/// Optimal holdings `(a, b)` in the asset and the volatility factor.
pub fn sv_holdings(
    model: &SvModel,
    partials: (f64, f64),
    state: &FactorState,
    risk: RiskAversion,
    t: f64,
) -> Result<(f64, f64)> {
    let (a, b) = sv_adjust(model, state, risk, t)?;
    Ok((partials.0 + a, partials.1 + b))
}

/// Risk premium `(mu/h^2 + alpha/beta^2 - rho (mu + alpha)/(h beta)) / (2 R (1 - rho^2))`.
pub fn sv_risk_premium(model: &SvModel, state: &FactorState, risk: RiskAversion, t: f64) -> Result<f64> {
    model.validate()?;
    let (mu, alpha, beta) = (model.drift.eval(t), model.vol_drift.eval(t), model.vol_vol.eval(t));
    let h = model.h.eval(state.vol)?;
    let rho = model.rho;
    Ok(risk.inverse() / (2.0 * (1.0 - rho * rho))
        * (mu / (h * h) + alpha / (beta * beta) - rho * (mu + alpha) / (h * beta)))
}

/// Drift of the optimal portfolio in excess of the riskless hedge:
/// `a_tilt S (mu - r) + b_tilt v (alpha - r)` per unit time.
pub fn sv_tilt_excess_drift(model: &SvModel, state: &FactorState, risk: RiskAversion, t: f64) -> Result<f64> {
    let (a, b) = sv_adjust(model, state, risk, t)?;
    let r = model.rate.eval(t);
    Ok(a * state.spot * (model.drift.eval(t) - r) + b * state.vol * (model.vol_drift.eval(t) - r))
}

/// Correlation determinant `D` and its Cramer numerators for the market-price vector
/// `(mu/h(v), alpha/g(w), gamma/delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Determinants {
    pub d: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_c: f64,
}

pub fn vov_determinants(model: &VovModel, state: &FactorState, t: f64, risk: RiskAversion) -> Result<Determinants> {
    model.validate()?;
    let h = model.h.eval(state.vol)?;
    let g = model.g.eval(state.vov)?;
    let m = [
        model.drift.eval(t) / h,
        model.vol_drift.eval(t) / g,
        model.vov_drift.eval(t) / model.vov_vol.eval(t),
    ];
    let corr = model.correlation();
    let d = det3(&corr);
    if !(d > super::MIN_CORRELATION_DET) {
        return Err(Error::NearSingularCorrelation(format!("correlation determinant {d:e}")));
    }
    let replaced = |col: usize, v: [f64; 3]| {
        let mut a = corr;
        for (row, x) in a.iter_mut().zip(v) {
            row[col] = x;
        }
        det3(&a)
    };
    let m_c = match model.dc_form {
        DcForm::Consistent => m,
        DcForm::Literal => [(1.0 - risk.relative()) * m[0], m[1], m[2]],
    };
    Ok(Determinants {
        d,
        d_a: replaced(0, m),
        d_b: replaced(1, m),
        d_c: replaced(2, m_c),
    })
}

pub(super) fn vov_adjust(model: &VovModel, state: &FactorState, risk: RiskAversion, t: f64) -> Result<(f64, f64, f64)> {
    let det = vov_determinants(model, state, t, risk)?;
    let inv_r = risk.inverse();
    let h = model.h.eval(state.vol)?;
    let g = model.g.eval(state.vov)?;
    let delta = model.vov_vol.eval(t);
    Ok((
        inv_r * det.d_a / (2.0 * h * state.spot * det.d),
        inv_r * det.d_b / (2.0 * g * state.vol * det.d),
        inv_r * det.d_c / (2.0 * delta * state.vov * det.d),
    ))
}

/// Optimal holdings `(a, b, c)` in the asset, volatility and vol-of-vol factors.
pub fn vov_holdings(
    model: &VovModel,
    partials: (f64, f64, f64),
    state: &FactorState,
    risk: RiskAversion,
    t: f64,
) -> Result<(f64, f64, f64)> {
    let (a, b, c) = vov_adjust(model, state, risk, t)?;
    Ok((partials.0 + a, partials.1 + b, partials.2 + c))
}

/// Excess drift of the three-factor tilt over the riskless hedge, per unit time.
pub fn vov_tilt_excess_drift(model: &VovModel, state: &FactorState, risk: RiskAversion, t: f64) -> Result<f64> {
    let (a, b, c) = vov_adjust(model, state, risk, t)?;
    let r = model.rate.eval(t);
    Ok(a * state.spot * (model.drift.eval(t) - r)
        + b * state.vol * (model.vol_drift.eval(t) - r)
        + c * state.vov * (model.vov_drift.eval(t) - r))
}

#[cfg(test)]
mod tests {
    use super::super::StateFn;
    use super::*;
    use crate::market::ParamSchedule as P;

    fn sv(rho: f64) -> SvModel {
        SvModel {
            drift: P::constant(0.1),
            vol_drift: P::constant(0.05),
            vol_vol: P::constant(0.3),
            rate: P::constant(0.01),
            rho,
            h: StateFn::Sqrt,
            spot: 100.0,
            vol_state: 0.04,
        }
    }

    fn vov(rho: (f64, f64, f64)) -> VovModel {
        VovModel {
            drift: P::constant(0.1),
            vol_drift: P::constant(0.05),
            vov_drift: P::constant(0.03),
            vov_vol: P::constant(0.4),
            rate: P::constant(0.01),
            rho_v: rho.0,
            rho_w: rho.1,
            rho_vw: rho.2,
            h: StateFn::Sqrt,
            g: StateFn::Sqrt,
            spot: 100.0,
            vol_state: 0.04,
            vov_state: 0.09,
            dc_form: DcForm::Consistent,
        }
    }

    #[test]
    fn sv_example() {
        let m = sv(0.0);
        let st = m.initial_state();
        let (a, b) = sv_holdings(&m, (0.5, 3.0), &st, RiskAversion::Finite(1.0), 0.0).unwrap();
        assert!((a - 0.5 - 0.0125).abs() < 1e-15);
        assert!((b - 3.0 - 0.05 / (2.0 * 0.09 * 0.04)).abs() < 1e-12);
        assert_eq!(
            sv_holdings(&m, (0.5, 3.0), &st, RiskAversion::Infinite, 0.0).unwrap(),
            (0.5, 3.0)
        );
        let prem = sv_risk_premium(&m, &st, RiskAversion::Finite(1.0), 0.0).unwrap();
        assert!((prem - 0.5 * (2.5 + 0.05 / 0.09)).abs() < 1e-12);
        assert_eq!(sv_risk_premium(&m, &st, RiskAversion::Infinite, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sv_rejects_extreme_correlation() {
        let m = sv(0.9995);
        assert!(matches!(
            sv_holdings(&m, (0.0, 0.0), &m.initial_state(), RiskAversion::Finite(1.0), 0.0),
            Err(Error::NearSingularCorrelation(_))
        ));
    }

    #[test]
    fn identity_correlation_determinants() {
        let m = vov((0.0, 0.0, 0.0));
        let st = m.initial_state();
        let d = vov_determinants(&m, &st, 0.0, RiskAversion::Finite(1.0)).unwrap();
        assert_eq!(d.d, 1.0);
        assert!((d.d_a - 0.1 / 0.2).abs() < 1e-15);
        assert!((d.d_b - 0.05 / 0.3).abs() < 1e-15);
        assert!((d.d_c - 0.03 / 0.4).abs() < 1e-15);
        let (a, b, c) = vov_holdings(&m, (0.0, 0.0, 0.0), &st, RiskAversion::Finite(2.0), 0.0).unwrap();
        assert!((a - 0.1 / (4.0 * 0.04 * 100.0)).abs() < 1e-15);
        assert!((b - 0.05 / (4.0 * 0.09 * 0.04)).abs() < 1e-12);
        assert!((c - 0.03 / (4.0 * 0.16 * 0.09)).abs() < 1e-12);
    }

    #[test]
    fn literal_third_determinant_differs_only_through_first_entry() {
        let mut m = vov((0.5, 0.3, 0.2));
        let st = m.initial_state();
        let consistent = vov_determinants(&m, &st, 0.0, RiskAversion::Finite(1.0)).unwrap();
        m.dc_form = DcForm::Literal;
        let literal = vov_determinants(&m, &st, 0.0, RiskAversion::Finite(1.0)).unwrap();
        assert_eq!(
            (consistent.d, consistent.d_a, consistent.d_b),
            (literal.d, literal.d_a, literal.d_b)
        );
        assert_ne!(consistent.d_c, literal.d_c);
        let infinite = vov_determinants(&m, &st, 0.0, RiskAversion::Infinite).unwrap();
        assert_eq!(
            infinite.d_c,
            det3(&[[1.0, 0.5, 0.0], [0.5, 1.0, 0.05 / 0.3], [0.3, 0.2, 0.03 / 0.4]])
        );
    }

    #[test]
    fn three_factor_reduces_to_two_factor() {
        // Uncorrelated third factor with g(w) equal to the two-factor vol-of-vol.
        let two = sv(0.0);
        let mut three = vov((0.0, 0.0, 0.0));
        three.g = StateFn::Constant { value: 0.3 };
        let st = two.initial_state();
        let st3 = FactorState { vov: 0.09, ..st };
        let r = RiskAversion::Finite(1.7);
        let (a2, b2) = sv_holdings(&two, (0.4, 1.0), &st, r, 0.0).unwrap();
        let (a3, b3, _) = vov_holdings(&three, (0.4, 1.0, 0.0), &st3, r, 0.0).unwrap();
        assert!((a2 - a3).abs() < 1e-14 && (b2 - b3).abs() < 1e-12);
    }
}
