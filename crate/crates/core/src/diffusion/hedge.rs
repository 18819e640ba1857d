use rand_distr::{Distribution, StandardNormal};

use super::{DiffusionModel, PricingSurface};
use crate::error::{Error, Result};
use crate::exec::{stream, Purpose};
use crate::grid::TimeGrid;
use crate::ledger::{
    run_paths, summarize, HedgeRecord, HedgeRun, LedgerKind, PathOutcome, RecordExtra, SimulationConfig, StepObs,
    StepTheory,
};
use crate::payoff::Payoff;
use crate::schedule::{RiskAversion, RiskAversionSchedule};

/// `psi(T - t) + dV/dx(spot, t)`.
pub fn delta_optimal_diffusion(
    surface: &PricingSurface,
    schedule: &RiskAversionSchedule,
    spot: f64,
    t: f64,
) -> Result<f64> {
    if !(spot > 0.0) {
        return Err(Error::param("spot", "must be positive"));
    }
    let tau = (schedule.horizon - t).max(0.0);
    Ok(schedule.psi(tau)? + surface.eval(spot, t)?.delta)
}

/// `mu / (2 R sigma^2 S) + rn delta`, the tilt written through risk aversion.
pub fn delta_from_risk_aversion(rn_delta: f64, drift: f64, volatility: f64, spot: f64, risk: RiskAversion) -> f64 {
    drift * risk.inverse() / (2.0 * volatility * volatility * spot) + rn_delta
}

pub fn simulate_hedge_diffusion(
    model: &DiffusionModel,
    surface: &PricingSurface,
    payoff: &Payoff,
    schedule: &RiskAversionSchedule,
    grid: TimeGrid,
    sim: &SimulationConfig,
) -> Result<HedgeRun> {
    model.validate()?;
    let n = grid.n_steps();
    let horizon = grid.horizon();
    let psi: Vec<f64> = (0..n).map(|k| schedule.psi(grid.tau(k))).collect::<Result<_>>()?;
    let mu_int: Vec<f64> = (0..n)
        .map(|k| model.drift.integrate(grid.time(k), grid.time(k + 1)))
        .collect();
    let var_int: Vec<f64> = (0..n)
        .map(|k| model.integrated_variance(grid.time(k), grid.time(k + 1)))
        .collect();
    let growth: Vec<f64> = (0..n)
        .map(|k| model.rate.integrate(grid.time(k), grid.time(k + 1)).exp_m1())
        .collect();
    let premium = surface.eval(model.spot, 0.0)?.value;

    let (stats, ledgers) = run_paths(sim, n, |path, keep| {
        let mut rng = stream(sim.seed, Purpose::DiffusionHedge, path as u64);
        let mut steps = Vec::with_capacity(n);
        let mut records = keep.then(|| Vec::with_capacity(n));
        let mut s = model.spot;
        let mut point = surface.eval(s, 0.0)?;
        let mut wealth = 0.0;
        for k in 0..n {
            let delta = psi[k] + point.delta;
            let portfolio = delta * s - point.value;
            let z: f64 = StandardNormal.sample(&mut rng);
            let s1 = s * (mu_int[k] - 0.5 * var_int[k] + var_int[k].sqrt() * z).exp();
            let next = if k + 1 == n {
                let v = payoff.eval_checked(s1)?;
                super::SurfacePoint {
                    value: v,
                    delta: 0.0,
                    gamma: 0.0,
                    theta: 0.0,
                }
            } else {
                surface.eval(s1, grid.time(k + 1))?
            };
            let accrual = growth[k] * portfolio;
            let residual = delta * (s1 - s) - (next.value - point.value) - accrual;
            wealth = wealth * (1.0 + growth[k]) + residual;
            steps.push(StepObs {
                residual,
                spot: s,
                expected: psi[k] * s * (mu_int[k].exp_m1() - growth[k]),
            });
            if let Some(r) = records.as_mut() {
                r.push(HedgeRecord {
                    step: k,
                    t: grid.time(k),
                    tau: grid.tau(k),
                    spot: s,
                    delta,
                    option: point.value,
                    portfolio,
                    accrual,
                    residual,
                    extra: RecordExtra::None,
                });
            }
            s = s1;
            point = next;
        }
        Ok(PathOutcome {
            steps,
            terminal_error: psi[n - 1] * s,
            wealth,
            records,
        })
    })?;

    let summary = summarize("diffusion", sim, horizon, premium, &stats, |k| StepTheory {
        t: grid.time(k),
        tau: grid.tau(k),
        psi: psi[k],
        unit_mean: Some(psi[k] * (mu_int[k].exp_m1() - growth[k])),
        unit_std: Some(psi[k] * mu_int[k].exp() * var_int[k].exp_m1().sqrt()),
    });
    Ok(HedgeRun {
        kind: LedgerKind::Single,
        ledgers,
        stats,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{bs_price, OptionKind};
    use crate::schedule::risk_aversion_from_psi;
    use proptest::prelude::*;

    #[test]
    fn adjustment_at_inception() {
        let m = DiffusionModel::constant(0.08, 0.2, 0.01, 100.0).unwrap();
        let call = Payoff::call(100.0).unwrap();
        let surface = PricingSurface::closed_form(&m, &call, 1.0).unwrap();
        let s = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
        for spot in [60.0, 100.0, 150.0] {
            let d = delta_optimal_diffusion(&surface, &s, spot, 0.0).unwrap();
            let rn = bs_price(spot, 100.0, 0.2, 0.01, 1.0, OptionKind::Call).unwrap().delta;
            assert!((d - rn - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        }
        let z = RiskAversionSchedule::zero(1.0).unwrap();
        assert_eq!(
            delta_optimal_diffusion(&surface, &z, 90.0, 0.4).unwrap(),
            surface.eval(90.0, 0.4).unwrap().delta
        );
    }

    proptest! {
        #[test]
        fn risk_aversion_form_agrees(mu in 0.02..0.3f64, sigma in 0.05..0.8f64, spot in 10.0..400.0f64, gamma in 0.01..5.0f64, tau in 0.001..1.0f64) {
            let s = RiskAversionSchedule::exponential(gamma, 1.0).unwrap();
            let psi = s.psi(tau).unwrap();
            let risk = risk_aversion_from_psi(psi, spot, mu, sigma).unwrap();
            let tilt = delta_from_risk_aversion(0.0, mu, sigma, spot, risk);
            prop_assert!((tilt / psi - 1.0).abs() <= 1e-12);
        }
    }
}
