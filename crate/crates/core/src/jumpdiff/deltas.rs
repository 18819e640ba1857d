use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::claim::{ClaimQuote, TwoAssetClaim};
use super::{poisson_inverse, JumpModel, JumpParams};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, stream, Execution, Purpose};
use crate::schedule::RiskAversion;
use crate::stats::Moments;

fn check_state(state: [f64; 2]) -> Result<()> {
    if state.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(Error::param("state", "spots must be positive"))
    }
}

/// Holdings that cancel both the Brownian and the jump exposure of the short claim.
pub fn rn_deltas_jump(model: &JumpModel, quote: &ClaimQuote, state: [f64; 2], t: f64) -> Result<[f64; 2]> {
    check_state(state)?;
    let p = model.spanning_params(t)?;
    Ok(rn_from_params(&p, quote, state))
}

fn rn_from_params(p: &JumpParams, q: &ClaimQuote, s: [f64; 2]) -> [f64; 2] {
    let [s1, s2] = p.volatility;
    let [g1, g2] = p.jump;
    let d = p.loading_det();
    let d1 = (s1 * q.d1 * s[0] * g2 + s2 * q.d2 * s[1] * g2 - q.displaced * s2 + q.value * s2) / (s[0] * d);
    let d2 = (q.displaced * s1 - q.value * s1 - s1 * q.d1 * s[0] * g1 - s2 * q.d2 * s[1] * g1) / (s[1] * d);
    [d1, d2]
}

/// Per-dollar covariance rate of the two assets, `sigma sigma' + lambda gamma gamma'`.
fn covariance(p: &JumpParams) -> [[f64; 2]; 2] {
    let (s, g, l) = (p.volatility, p.jump, p.intensity);
    [
        [s[0] * s[0] + l * g[0] * g[0], s[0] * s[1] + l * g[0] * g[1]],
        [s[0] * s[1] + l * g[0] * g[1], s[1] * s[1] + l * g[1] * g[1]],
    ]
}

/// Dollar tilt maximising `E(dP) - R var(dP)`: `Sigma^{-1} m / (2R)`.
fn dollar_tilt(p: &JumpParams, risk: RiskAversion) -> [f64; 2] {
    let c = covariance(p);
    let m = p.total_drift();
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let k = 0.5 * risk.inverse() / det;
    [
        k * (c[1][1] * m[0] - c[0][1] * m[1]),
        k * (c[0][0] * m[1] - c[1][0] * m[0]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalDeltas {
    pub deltas: [f64; 2],
    pub rn: [f64; 2],
    /// `deltas - rn`, from the first-order conditions of the one-step utility.
    pub correction: [f64; 2],
    /// Closed-form corrections `Sigma^-1 m / R`, without the factor 1/2; kept for comparison.
    pub reference_correction: [f64; 2],
}

/// Risk-neutral deltas plus the utility-maximising correction. The reference
/// closed forms are exactly twice the maximiser; they are reported alongside.
pub fn optimal_deltas_jump(
    model: &JumpModel,
    quote: &ClaimQuote,
    state: [f64; 2],
    risk: RiskAversion,
    t: f64,
) -> Result<OptimalDeltas> {
    check_state(state)?;
    check_risk(risk)?;
    let p = model.spanning_params(t)?;
    let rn = rn_from_params(&p, quote, state);
    let y = dollar_tilt(&p, risk);
    let correction = [y[0] / state[0], y[1] / state[1]];
    Ok(OptimalDeltas {
        deltas: [rn[0] + correction[0], rn[1] + correction[1]],
        rn,
        correction,
        reference_correction: reference_from_params(&p, state, risk),
    })
}

fn check_risk(risk: RiskAversion) -> Result<()> {
    match risk {
        RiskAversion::Finite(r) if !(r.is_finite() && r > 0.0) => {
            Err(Error::param("risk_aversion", format!("must be positive, got {r}")))
        }
        _ => Ok(()),
    }
}

/// Closed-form correction terms `Sigma^-1 m / R`, twice the utility maximiser.
pub fn reference_corrections(model: &JumpModel, state: [f64; 2], risk: RiskAversion, t: f64) -> Result<[f64; 2]> {
    check_state(state)?;
    check_risk(risk)?;
    let p = model.spanning_params(t)?;
    Ok(reference_from_params(&p, state, risk))
}

fn reference_from_params(p: &JumpParams, s: [f64; 2], risk: RiskAversion) -> [f64; 2] {
    let [m1, m2] = p.drift;
    let [s1, s2] = p.volatility;
    let [g1, g2] = p.jump;
    let l = p.intensity;
    let d = s1 * g2 - g1 * s2;
    let d_rev = g1 * s2 - g2 * s1;
    let inv = risk.inverse();
    let e1 = inv / s[0] * (s2 * (m1 * s2 - m2 * s1) / (l * d * d) - s2 / d + g2 * (m1 * g2 - m2 * g1) / (d * d));
    let e2 = inv / s[1]
        * (s1 * (m2 * s1 - m1 * s2) / (l * d_rev * d_rev)
            + l * s1 * (s1 * g2 - s2 * g1) / (l * d_rev * d_rev)
            + l * g1 * (m2 * g1 - m1 * g2) / (l * d_rev * d_rev));
    [e1, e2]
}

/// Instantaneous utility rate `(1 - C) E(dP)/dt - C var(dP)/dt` of holding `deltas`
/// against the short claim.
pub fn jump_utility(
    model: &JumpModel,
    quote: &ClaimQuote,
    state: [f64; 2],
    risk: RiskAversion,
    t: f64,
    deltas: [f64; 2],
) -> Result<f64> {
    check_state(state)?;
    check_risk(risk)?;
    let p = model.spanning_params(t)?;
    let rn = rn_from_params(&p, quote, state);
    let y = [(deltas[0] - rn[0]) * state[0], (deltas[1] - rn[1]) * state[1]];
    let riskless = rn[0] * state[0] + rn[1] * state[1] - quote.value;
    let m = p.total_drift();
    let c = covariance(&p);
    // the risk-free portfolio earns the rate only when the drifts admit the pricing measure
    let carry = (rn[0] - quote.d1) * state[0] * (m[0] - p.rate) + (rn[1] - quote.d2) * state[1] * (m[1] - p.rate);
    let mean = p.rate * riskless + carry + y[0] * m[0] + y[1] * m[1];
    let var = y[0] * y[0] * c[0][0] + 2.0 * y[0] * y[1] * c[0][1] + y[1] * y[1] * c[1][1];
    let cr = risk.relative();
    Ok((1.0 - cr) * mean - cr * var)
}

/// Variance of the one-step increment of the risk-neutral hedge,
/// `Delta_rn . dS - dV`, for each step size, over `n_samples` Euler steps
/// under the physical measure. The same normals and uniforms are reused for
/// every step size.
#[allow(clippy::too_many_arguments)]
pub fn rn_step_variances(
    model: &JumpModel,
    claim: &dyn TwoAssetClaim,
    state: [f64; 2],
    t: f64,
    steps: &[f64],
    n_samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<f64>> {
    check_state(state)?;
    if n_samples < 2 {
        return Err(Error::param("n_samples", "need at least 2"));
    }
    for &h in steps {
        if !(h > 0.0 && t + h <= claim.horizon()) {
            return Err(Error::param(
                "step",
                format!("step {h} must be positive and end before the horizon"),
            ));
        }
    }
    let p = model.spanning_params(t)?;
    let q = claim.quote(model, state, t)?;
    let rn = rn_from_params(&p, &q, state);
    let chunks = map_chunks(n_samples, execution, |range| -> Result<Vec<Moments>> {
        let mut acc = vec![Moments::default(); steps.len()];
        for i in range {
            let mut rng = stream(seed, Purpose::JumpOneStep, i as u64);
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            for (a, &h) in acc.iter_mut().zip(steps) {
                let n = poisson_inverse(p.intensity * h, u) as f64;
                let next: [f64; 2] = std::array::from_fn(|j| {
                    state[j] * (1.0 + p.drift[j] * h + p.volatility[j] * h.sqrt() * z + p.jump[j] * n)
                });
                if next.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::NonFinite("one-step state"));
                }
                let v1 = claim.value(model, next, t + h)?;
                a.push(rn[0] * (next[0] - state[0]) + rn[1] * (next[1] - state[1]) - (v1 - q.value));
            }
        }
        Ok(acc)
    });
    let mut acc = vec![Moments::default(); steps.len()];
    for c in chunks {
        for (a, b) in acc.iter_mut().zip(c?.iter()) {
            a.merge(b);
        }
    }
    Ok(acc.iter().map(Moments::variance_mle).collect())
}
