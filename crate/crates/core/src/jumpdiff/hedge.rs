use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use super::claim::TwoAssetClaim;
use super::deltas::{jump_utility, optimal_deltas_jump};
use super::{poisson, JumpModel};
use crate::error::{Error, Result};
use crate::exec::{stream, Purpose};
use crate::grid::TimeGrid;
use crate::ledger::{
    run_paths, summarize, HedgeRecord, HedgeRun, LedgerKind, PathOutcome, RecordExtra, SimulationConfig, StepObs,
    StepTheory,
};
use crate::schedule::{risk_aversion_from_psi, RiskAversion, RiskAversionSchedule};

fn risk_at(model: &JumpModel, psi: f64, spot1: f64, t: f64) -> Result<RiskAversion> {
    let p = model.params(t);
    let risk = risk_aversion_from_psi(psi, spot1, p.drift[0], p.volatility[0])?;
    match risk {
        RiskAversion::Finite(r) if !(r > 0.0 && r.is_finite()) => Err(Error::param(
            "drift1",
            format!("a positive tilt needs positive drift of asset 1, got {}", p.drift[0]),
        )),
        _ => Ok(risk),
    }
}

/// Hedges a short two-asset claim with both assets. Risk aversion follows the
/// schedule through asset 1, `R = mu1 / (2 psi S1 sigma1^2)`; the correction
/// maximises the one-step utility.
pub fn simulate_hedge_jump(
    model: &JumpModel,
    claim: &dyn TwoAssetClaim,
    schedule: &RiskAversionSchedule,
    grid: TimeGrid,
    sim: &SimulationConfig,
) -> Result<HedgeRun> {
    let horizon = grid.horizon();
    model.validate(horizon)?;
    if (claim.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::param(
            "horizon",
            format!("claim matures at {}, grid at {horizon}", claim.horizon()),
        ));
    }
    let n = grid.n_steps();
    let dt = grid.step();
    let sq = dt.sqrt();
    let psi: Vec<f64> = (0..n).map(|k| schedule.psi(grid.tau(k))).collect::<Result<_>>()?;
    let premium = claim.value(model, model.spot, 0.0)?;

    let (stats, ledgers) = run_paths(sim, n, |path, keep| {
        let mut rng = stream(sim.seed, Purpose::JumpHedge, path as u64);
        let mut steps = Vec::with_capacity(n);
        let mut records = keep.then(|| Vec::with_capacity(n));
        let mut x = model.spot;
        let mut q = claim.quote(model, x, 0.0)?;
        let mut wealth = 0.0;
        let mut tilt = [0.0; 2];
        for k in 0..n {
            let t = grid.time(k);
            let p = model.params(t);
            let risk = risk_at(model, psi[k], x[0], t)?;
            let opt = optimal_deltas_jump(model, &q, x, risk, t)?;
            tilt = opt.correction;
            let hold = opt.deltas;
            let portfolio = hold[0] * x[0] + hold[1] * x[1] - q.value;
            let growth = (p.rate * dt).exp_m1();
            let z: f64 = rng.sample(StandardNormal);
            let jumps = poisson(model.intensity.integrate(t, t + dt), &mut rng);
            let next: [f64; 2] = std::array::from_fn(|j| {
                let (mu, sig, g) = (p.drift[j], p.volatility[j], p.jump[j]);
                x[j] * ((mu - 0.5 * sig * sig) * dt + sig * sq * z + jumps as f64 * g.ln_1p()).exp()
            });
            let q1 = if k + 1 == n {
                let v = claim.terminal(next)?;
                super::ClaimQuote {
                    value: v,
                    d1: 0.0,
                    d2: 0.0,
                    displaced: v,
                }
            } else {
                claim.quote(model, next, grid.time(k + 1))?
            };
            let accrual = growth * portfolio;
            let residual = hold[0] * (next[0] - x[0]) + hold[1] * (next[1] - x[1]) - (q1.value - q.value) - accrual;
            let m = p.total_drift();
            let expected: f64 = (0..2)
                .map(|j| tilt[j] * x[j] * ((m[j] * dt).exp() - (p.rate * dt).exp()))
                .sum();
            wealth = wealth * (1.0 + growth) + residual;
            steps.push(StepObs {
                residual,
                spot: x[0],
                expected,
            });
            if let Some(rec) = records.as_mut() {
                rec.push(HedgeRecord {
                    step: k,
                    t,
                    tau: grid.tau(k),
                    spot: x[0],
                    delta: hold[0],
                    option: q.value,
                    portfolio,
                    accrual,
                    residual,
                    extra: RecordExtra::Jump {
                        spot2: x[1],
                        delta2: hold[1],
                        jumps_count: jumps,
                    },
                });
            }
            x = next;
            q = q1;
        }
        Ok(PathOutcome {
            steps,
            terminal_error: tilt[0] * x[0] + tilt[1] * x[1],
            wealth,
            records,
        })
    })?;

    let mut summary = summarize("jump", sim, horizon, premium, &stats, |k| StepTheory {
        t: grid.time(k),
        tau: grid.tau(k),
        psi: psi[k],
        unit_mean: None,
        unit_std: None,
    });
    summary.oracle_check = Some(correction_check(model, claim, psi[0])?);
    Ok(HedgeRun {
        kind: LedgerKind::Jump,
        ledgers,
        stats,
        summary,
    })
}

/// Reference corrections against the utility maximiser at inception.
fn correction_check(model: &JumpModel, claim: &dyn TwoAssetClaim, psi0: f64) -> Result<serde_json::Value> {
    let x = model.spot;
    let risk = risk_at(model, psi0, x[0], 0.0)?;
    let q = claim.quote(model, x, 0.0)?;
    let o = optimal_deltas_jump(model, &q, x, risk, 0.0)?;
    let reference = [o.rn[0] + o.reference_correction[0], o.rn[1] + o.reference_correction[1]];
    let ratio = |j: usize| {
        if o.correction[j] != 0.0 {
            Some(o.reference_correction[j] / o.correction[j])
        } else {
            None
        }
    };
    Ok(json!({
        "t": 0.0,
        "risk_aversion": match risk { RiskAversion::Finite(r) => Some(r), RiskAversion::Infinite => None },
        "rn_deltas": o.rn,
        "oracle_correction": o.correction,
        "reference_correction": o.reference_correction,
        "reference_over_oracle": [ratio(0), ratio(1)],
        "utility_at_oracle": jump_utility(model, &q, x, risk, 0.0, o.deltas)?,
        "utility_at_reference": jump_utility(model, &q, x, risk, 0.0, reference)?,
        "used": "oracle",
    }))
}
