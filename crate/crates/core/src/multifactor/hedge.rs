use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use super::holdings::{sv_adjust, vov_adjust};
use super::{cholesky3, mc_price_and_partials, FactorState, McPricing, MultifactorModel};
use crate::error::Result;
use crate::exec::{stream, Execution, Purpose};
use crate::grid::TimeGrid;
use crate::ledger::{
    run_paths, summarize, HedgeRecord, HedgeRun, LedgerKind, PathOutcome, RecordExtra, SimulationConfig, StepObs,
    StepTheory,
};
use crate::payoff::Payoff;
use crate::schedule::{risk_aversion_from_psi, RiskAversion, RiskAversionSchedule};

struct Quote {
    value: f64,
    partials: [f64; 3],
}

/// Hedges a short claim with the asset and its traded volatility factors.
///
/// Prices and partials come from nested Monte-Carlo with one fixed seed, so the
/// pricer is a deterministic function of the state. Risk aversion follows the
/// schedule through the asset leg, `R = mu / (2 psi S h(v)^2)`.
pub fn simulate_hedge_multifactor(
    model: &MultifactorModel,
    payoff: &Payoff,
    pricing: &McPricing,
    schedule: &RiskAversionSchedule,
    grid: TimeGrid,
    sim: &SimulationConfig,
) -> Result<HedgeRun> {
    model.validate()?;
    pricing.validate()?;
    let n = grid.n_steps();
    let horizon = grid.horizon();
    let dt = grid.step();
    let sq = dt.sqrt();
    let psi: Vec<f64> = (0..n).map(|k| schedule.psi(grid.tau(k))).collect::<Result<_>>()?;
    let inner = McPricing {
        execution: Execution::Sequential,
        ..*pricing
    };
    let quote = |state: &FactorState, k: usize| -> Result<Quote> {
        let tau = grid.tau(k);
        let steps = ((pricing.n_steps as f64 * tau / horizon).ceil() as usize).max(1);
        let p = mc_price_and_partials(
            model,
            payoff,
            &McPricing {
                n_steps: steps,
                ..inner
            },
            state,
            grid.time(k),
            horizon,
        )?;
        Ok(Quote {
            value: p.value,
            partials: [p.d_spot, p.d_vol, p.d_vov.unwrap_or(0.0)],
        })
    };
    let chol = match model {
        MultifactorModel::Vov(m) => Some(cholesky3(&m.correlation())?),
        MultifactorModel::Sv(_) => None,
    };
    let premium = quote(&model.initial_state(), 0)?.value;

    let (stats, ledgers) = run_paths(sim, n, |path, keep| {
        let mut rng = stream(sim.seed, Purpose::MultifactorHedge, path as u64);
        let mut steps = Vec::with_capacity(n);
        let mut records = keep.then(|| Vec::with_capacity(n));
        let mut st = model.initial_state();
        let mut q = quote(&st, 0)?;
        let mut wealth = 0.0;
        let mut tilt = [0.0; 3];
        for k in 0..n {
            let t = grid.time(k);
            let (mu, h) = match model {
                MultifactorModel::Sv(m) => (m.drift.eval(t), m.h.eval(st.vol)?),
                MultifactorModel::Vov(m) => (m.drift.eval(t), m.h.eval(st.vol)?),
            };
            let risk = risk_aversion_from_psi(psi[k], st.spot, mu, h)?;
            tilt = adjustments(model, &st, risk, t)?;
            let hold: [f64; 3] = std::array::from_fn(|i| q.partials[i] + tilt[i]);
            let levels = [st.spot, st.vol, st.vov];
            let portfolio = hold.iter().zip(levels).map(|(a, x)| a * x).sum::<f64>() - q.value;
            let r = model.rate().eval(t);
            let growth = (r * dt).exp_m1();
            let drifts = factor_drifts(model, t);
            let next = step_state(model, chol.as_ref(), &st, t, dt, sq, &mut rng)?;
            let q1 = if k + 1 == n {
                Quote {
                    value: payoff.eval_checked(next.spot)?,
                    partials: [0.0; 3],
                }
            } else {
                quote(&next, k + 1)?
            };
            let moves = [next.spot - st.spot, next.vol - st.vol, next.vov - st.vov];
            let accrual = growth * portfolio;
            let residual = hold.iter().zip(moves).map(|(a, d)| a * d).sum::<f64>() - (q1.value - q.value) - accrual;
            let expected: f64 = (0..3)
                .map(|i| tilt[i] * levels[i] * ((drifts[i] * dt).exp() - (r * dt).exp()))
                .sum();
            wealth = wealth * (1.0 + growth) + residual;
            steps.push(StepObs {
                residual,
                spot: st.spot,
                expected,
            });
            if let Some(rec) = records.as_mut() {
                rec.push(HedgeRecord {
                    step: k,
                    t,
                    tau: grid.tau(k),
                    spot: st.spot,
                    delta: hold[0],
                    option: q.value,
                    portfolio,
                    accrual,
                    residual,
                    extra: RecordExtra::Multifactor {
                        vol_state: st.vol,
                        vov_state: st.vov,
                        b_holding: hold[1],
                        c_holding: hold[2],
                    },
                });
            }
            st = next;
            q = q1;
        }
        let terminal_error = tilt[0] * st.spot + tilt[1] * st.vol + tilt[2] * st.vov;
        Ok(PathOutcome {
            steps,
            terminal_error,
            wealth,
            records,
        })
    })?;

    let mut summary = summarize(model.tag(), sim, horizon, premium, &stats, |k| StepTheory {
        t: grid.time(k),
        tau: grid.tau(k),
        psi: psi[k],
        unit_mean: None,
        unit_std: None,
    });
    summary.oracle_check = Some(premium_check(model, psi[0])?);
    Ok(HedgeRun {
        kind: LedgerKind::Multifactor,
        ledgers,
        stats,
        summary,
    })
}

fn adjustments(model: &MultifactorModel, st: &FactorState, risk: RiskAversion, t: f64) -> Result<[f64; 3]> {
    Ok(match model {
        MultifactorModel::Sv(m) => {
            let (a, b) = sv_adjust(m, st, risk, t)?;
            [a, b, 0.0]
        }
        MultifactorModel::Vov(m) => {
            let (a, b, c) = vov_adjust(m, st, risk, t)?;
            [a, b, c]
        }
    })
}

fn factor_drifts(model: &MultifactorModel, t: f64) -> [f64; 3] {
    match model {
        MultifactorModel::Sv(m) => [m.drift.eval(t), m.vol_drift.eval(t), 0.0],
        MultifactorModel::Vov(m) => [m.drift.eval(t), m.vol_drift.eval(t), m.vov_drift.eval(t)],
    }
}

/// One exact-in-log step of the physical dynamics.
fn step_state(
    model: &MultifactorModel,
    chol: Option<&[[f64; 3]; 3]>,
    st: &FactorState,
    t: f64,
    dt: f64,
    sq: f64,
    rng: &mut impl Rng,
) -> Result<FactorState> {
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    match model {
        MultifactorModel::Sv(m) => {
            let (z1, z2) = (z(), z());
            let zs = m.rho * z1 + (1.0 - m.rho * m.rho).sqrt() * z2;
            let h = m.h.eval(st.vol)?;
            let (mu, alpha, beta) = (m.drift.eval(t), m.vol_drift.eval(t), m.vol_vol.eval(t));
            Ok(FactorState {
                spot: st.spot * ((mu - 0.5 * h * h) * dt + h * sq * zs).exp(),
                vol: st.vol * ((alpha - 0.5 * beta * beta) * dt + beta * sq * z1).exp(),
                vov: 0.0,
            })
        }
        MultifactorModel::Vov(m) => {
            let l = chol.expect("vov factor");
            let xi = [z(), z(), z()];
            let zz: [f64; 3] = std::array::from_fn(|i| (0..=i).map(|k| l[i][k] * xi[k]).sum());
            let h = m.h.eval(st.vol)?;
            let g = m.g.eval(st.vov)?;
            let (mu, alpha, gamma, delta) = (
                m.drift.eval(t),
                m.vol_drift.eval(t),
                m.vov_drift.eval(t),
                m.vov_vol.eval(t),
            );
            Ok(FactorState {
                spot: st.spot * ((mu - 0.5 * h * h) * dt + h * sq * zz[0]).exp(),
                vol: st.vol * ((alpha - 0.5 * g * g) * dt + g * sq * zz[1]).exp(),
                vov: st.vov * ((gamma - 0.5 * delta * delta) * dt + delta * sq * zz[2]).exp(),
            })
        }
    }
}

/// Risk premium at inception: the closed form next to the derived excess drift.
fn premium_check(model: &MultifactorModel, psi0: f64) -> Result<serde_json::Value> {
    let st = model.initial_state();
    let (mu, h) = match model {
        MultifactorModel::Sv(m) => (m.drift.eval(0.0), m.h.eval(st.vol)?),
        MultifactorModel::Vov(m) => (m.drift.eval(0.0), m.h.eval(st.vol)?),
    };
    let risk = risk_aversion_from_psi(psi0, st.spot, mu, h)?;
    Ok(match model {
        MultifactorModel::Sv(m) => json!({
            "t": 0.0,
            "closed_form_risk_premium": super::sv_risk_premium(m, &st, risk, 0.0)?,
            "derived_tilt_excess_drift": super::sv_tilt_excess_drift(m, &st, risk, 0.0)?,
        }),
        MultifactorModel::Vov(m) => json!({
            "t": 0.0,
            "derived_tilt_excess_drift": super::vov_tilt_excess_drift(m, &st, risk, 0.0)?,
        }),
    })
}
