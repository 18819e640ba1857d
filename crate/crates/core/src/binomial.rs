//! Generalised binomial lattice with a free up-probability, and hedging on it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{stream, Purpose};
use crate::grid::TimeGrid;
use crate::ledger::{
    run_paths, summarize, HedgeRecord, HedgeRun, LedgerKind, PathOutcome, RecordExtra, SimulationConfig, StepObs,
    StepTheory,
};
use crate::market::MarketParams;
use crate::payoff::Payoff;
use crate::schedule::{RiskAversion, RiskAversionSchedule};

pub const MAX_LATTICE_STEPS: usize = 5000;

/// One binomial step: `S -> S u` with probability `p`, else `S -> S d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsrfStepModel {
    pub p_up: f64,
    pub up: f64,
    pub down: f64,
    pub step: f64,
}

impl KsrfStepModel {
    /// Factors matching drift and volatility for an arbitrary up-probability:
    /// `u = 1 + mu h + sqrt((1-p)/p) sigma sqrt(h)`, `d = 1 + mu h - sqrt(p/(1-p)) sigma sqrt(h)`.
    pub fn from_market(market: &MarketParams, step: f64, p_up: f64) -> Result<Self> {
        check_probability(p_up)?;
        let sh = market.volatility * step.sqrt();
        let m = 1.0 + market.drift * step;
        Self::from_factors(
            p_up,
            m + ((1.0 - p_up) / p_up).sqrt() * sh,
            m - (p_up / (1.0 - p_up)).sqrt() * sh,
            step,
        )
    }

    pub fn from_factors(p_up: f64, up: f64, down: f64, step: f64) -> Result<Self> {
        check_probability(p_up)?;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param("step", "must be positive"));
        }
        if !(down > 0.0) {
            return Err(Error::DegenerateDownFactor(down));
        }
        if !(up > down && up.is_finite()) {
            return Err(Error::param(
                "up",
                format!("up factor {up} must exceed down factor {down}"),
            ));
        }
        Ok(Self { p_up, up, down, step })
    }

    /// Up-probability under which the lattice converges to the log-normal model.
    pub fn crr_probability(market: &MarketParams, step: f64) -> f64 {
        let s = market.volatility;
        0.5 + (market.drift - 0.5 * s * s) / (2.0 * s) * step.sqrt()
    }

    pub fn risk_neutral_probability(&self, rate: f64) -> Result<f64> {
        let q = ((rate * self.step).exp() - self.down) / (self.up - self.down);
        if q > 0.0 && q < 1.0 {
            Ok(q)
        } else {
            Err(Error::ArbitrageStepModel(q))
        }
    }

    /// Per-year mean return `(p u + (1-p) d - 1) / h` of the step.
    pub fn implied_drift(&self) -> f64 {
        (self.p_up * (self.up - 1.0) + (1.0 - self.p_up) * (self.down - 1.0)) / self.step
    }

    /// Per-root-year volatility `(u - d) sqrt(p (1-p)) / sqrt(h)` of the step.
    pub fn implied_volatility(&self) -> f64 {
        (self.up - self.down) * (self.p_up * (1.0 - self.p_up)).sqrt() / self.step.sqrt()
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateUpProbability(p))
    }
}

/// Recombining tree of prices, risk-neutral option values and risk-neutral deltas.
#[derive(Debug, Clone)]
pub struct BinomialLattice {
    pub step_model: KsrfStepModel,
    pub grid: TimeGrid,
    pub spot: f64,
    pub rate: f64,
    pub drift: f64,
    pub volatility: f64,
    pub q: f64,
    prices: Vec<f64>,
    values: Vec<f64>,
    rn_deltas: Vec<f64>,
}

#[inline]
fn idx(k: usize, j: usize) -> usize {
    k * (k + 1) / 2 + j
}

pub fn build_lattice(market: &MarketParams, grid: TimeGrid, p_up: f64, payoff: &Payoff) -> Result<BinomialLattice> {
    market.validate()?;
    let step_model = KsrfStepModel::from_market(market, grid.step(), p_up)?;
    let mut lattice = BinomialLattice::from_step_model(step_model, market.spot, market.rate, grid.n_steps(), payoff)?;
    lattice.drift = market.drift;
    lattice.volatility = market.volatility;
    Ok(lattice)
}

impl BinomialLattice {
    pub fn from_step_model(
        step_model: KsrfStepModel,
        spot: f64,
        rate: f64,
        n_steps: usize,
        payoff: &Payoff,
    ) -> Result<Self> {
        if n_steps > MAX_LATTICE_STEPS {
            return Err(Error::param(
                "n_steps",
                format!("lattice limited to {MAX_LATTICE_STEPS} steps"),
            ));
        }
        if !(spot.is_finite() && spot > 0.0) {
            return Err(Error::param("spot", "must be positive"));
        }
        let grid = TimeGrid::new(n_steps, n_steps as f64 * step_model.step)?;
        let q = step_model.risk_neutral_probability(rate)?;
        let (u, d) = (step_model.up, step_model.down);
        let n = n_steps;
        let size = idx(n, n) + 1;

        let mut prices = vec![0.0; size];
        for k in 0..=n {
            for j in 0..=k {
                prices[idx(k, j)] = spot * u.powi(j as i32) * d.powi((k - j) as i32);
            }
        }

        let mut values = vec![0.0; size];
        for j in 0..=n {
            values[idx(n, j)] = payoff.eval_checked(prices[idx(n, j)])?;
        }
        let disc = (-rate * step_model.step).exp();
        let mut rn_deltas = vec![0.0; idx(n, 0)];
        for k in (0..n).rev() {
            for j in 0..=k {
                let fu = values[idx(k + 1, j + 1)];
                let fd = values[idx(k + 1, j)];
                values[idx(k, j)] = disc * (q * fu + (1.0 - q) * fd);
                rn_deltas[idx(k, j)] = (fu - fd) / (prices[idx(k, j)] * (u - d));
            }
        }

        Ok(Self {
            step_model,
            grid,
            spot,
            rate,
            drift: step_model.implied_drift(),
            volatility: step_model.implied_volatility(),
            q,
            prices,
            values,
            rn_deltas,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    fn check(&self, k: usize, j: usize, interior: bool) -> Result<()> {
        let ok = j <= k
            && if interior {
                k < self.n_steps()
            } else {
                k <= self.n_steps()
            };
        if ok {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { step: k, node: j })
        }
    }

    pub fn price(&self, k: usize, j: usize) -> Result<f64> {
        self.check(k, j, false)?;
        Ok(self.prices[idx(k, j)])
    }

    pub fn value(&self, k: usize, j: usize) -> Result<f64> {
        self.check(k, j, false)?;
        Ok(self.values[idx(k, j)])
    }

    pub fn rn_delta(&self, k: usize, j: usize) -> Result<f64> {
        self.check(k, j, true)?;
        Ok(self.rn_deltas[idx(k, j)])
    }

    pub fn premium(&self) -> f64 {
        self.values[0]
    }

    /// Option values one step ahead of node `(k, j)`: `(f_up, f_down)`.
    pub fn children(&self, k: usize, j: usize) -> Result<(f64, f64)> {
        self.check(k, j, true)?;
        Ok((self.values[idx(k + 1, j + 1)], self.values[idx(k + 1, j)]))
    }
}

/// Single-step optimal delta with the gross mean factor `p u + (1-p) d` in the tilt.
pub fn delta_one_step(spot: f64, model: &KsrfStepModel, f_up: f64, f_down: f64, risk: RiskAversion) -> f64 {
    let KsrfStepModel {
        p_up: p,
        up: u,
        down: d,
        ..
    } = *model;
    tilt(spot, model, p * u + (1.0 - p) * d, risk) + (f_up - f_down) / (spot * (u - d))
}

/// Single-step optimal delta with the net mean return `p u + (1-p) d - 1` in the tilt.
/// This is the form that agrees with the schedule inversion node by node.
pub fn delta_one_step_increment(spot: f64, model: &KsrfStepModel, f_up: f64, f_down: f64, risk: RiskAversion) -> f64 {
    let KsrfStepModel {
        p_up: p,
        up: u,
        down: d,
        ..
    } = *model;
    let mean = p * (u - 1.0) + (1.0 - p) * (d - 1.0);
    tilt(spot, model, mean, risk) + (f_up - f_down) / (spot * (u - d))
}

fn tilt(spot: f64, model: &KsrfStepModel, mean: f64, risk: RiskAversion) -> f64 {
    let KsrfStepModel {
        p_up: p,
        up: u,
        down: d,
        ..
    } = *model;
    mean * risk.inverse() / (2.0 * p * (1.0 - p) * spot * (u - d) * (u - d))
}

/// Optimal delta written in drift/volatility terms:
/// `mu / (2 R S sigma^2) + (f_u - f_d) sqrt(p (1-p)) / (S sigma sqrt(h))`.
pub fn delta_drift_form(lattice: &BinomialLattice, k: usize, j: usize, risk: RiskAversion) -> Result<f64> {
    let s = lattice.price(k, j)?;
    let (fu, fd) = lattice.children(k, j)?;
    let m = &lattice.step_model;
    let (mu, sigma) = (lattice.drift, lattice.volatility);
    Ok(mu * risk.inverse() / (2.0 * s * sigma * sigma)
        + (fu - fd) * (m.p_up * (1.0 - m.p_up)).sqrt() / (s * sigma * m.step.sqrt()))
}

/// `psi(tau_k) + rn delta(k, j)`.
pub fn delta_at_node(lattice: &BinomialLattice, k: usize, j: usize, schedule: &RiskAversionSchedule) -> Result<f64> {
    let rn = lattice.rn_delta(k, j)?;
    Ok(schedule.psi(lattice.grid.tau(k))? + rn)
}

fn check_schedule(schedule: &RiskAversionSchedule, grid: &TimeGrid) -> Result<()> {
    if schedule.horizon + 1e-12 * grid.horizon() < grid.horizon() {
        return Err(Error::param(
            "horizon",
            "schedule horizon shorter than the hedging grid",
        ));
    }
    Ok(())
}

/// Hedges a short option along simulated lattice paths, holding `psi + rn delta` shares.
pub fn simulate_hedge(
    lattice: &BinomialLattice,
    schedule: &RiskAversionSchedule,
    sim: &SimulationConfig,
) -> Result<HedgeRun> {
    let grid = lattice.grid;
    check_schedule(schedule, &grid)?;
    let n = grid.n_steps();
    let h = grid.step();
    let growth = (lattice.rate * h).exp_m1();
    let mu_h = lattice.step_model.implied_drift() * h;
    let psi: Vec<f64> = (0..n).map(|k| schedule.psi(grid.tau(k))).collect::<Result<_>>()?;
    let p = lattice.step_model.p_up;

    let (stats, ledgers) = run_paths(sim, n, |path, keep| {
        let mut rng = stream(sim.seed, Purpose::BinomialHedge, path as u64);
        let mut steps = Vec::with_capacity(n);
        let mut records = keep.then(|| Vec::with_capacity(n));
        let mut j = 0usize;
        let mut wealth = 0.0;
        for k in 0..n {
            let s = lattice.prices[idx(k, j)];
            let f = lattice.values[idx(k, j)];
            let delta = psi[k] + lattice.rn_deltas[idx(k, j)];
            let portfolio = delta * s - f;
            if rng.random::<f64>() < p {
                j += 1;
            }
            let s1 = lattice.prices[idx(k + 1, j)];
            let f1 = lattice.values[idx(k + 1, j)];
            let accrual = growth * portfolio;
            let residual = delta * (s1 - s) - (f1 - f) - accrual;
            wealth = wealth * (1.0 + growth) + residual;
            steps.push(StepObs {
                residual,
                spot: s,
                expected: psi[k] * s * (mu_h - growth),
            });
            if let Some(r) = records.as_mut() {
                r.push(HedgeRecord {
                    step: k,
                    t: grid.time(k),
                    tau: grid.tau(k),
                    spot: s,
                    delta,
                    option: f,
                    portfolio,
                    accrual,
                    residual,
                    extra: RecordExtra::None,
                });
            }
        }
        let terminal_error = psi[n - 1] * lattice.prices[idx(n, j)];
        Ok(PathOutcome {
            steps,
            terminal_error,
            wealth,
            records,
        })
    })?;

    let sigma_sqrt_h = lattice.step_model.implied_volatility() * h.sqrt();
    let summary = summarize("binomial", sim, grid.horizon(), lattice.premium(), &stats, |k| {
        StepTheory {
            t: grid.time(k),
            tau: grid.tau(k),
            psi: psi[k],
            unit_mean: Some(psi[k] * (mu_h - growth)),
            unit_std: Some(psi[k] * sigma_sqrt_h),
        }
    });
    Ok(HedgeRun {
        kind: LedgerKind::Single,
        ledgers,
        stats,
        summary,
    })
}
