use std::io::Read;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{estimate_ph, PhEstimate, PriceSeries, MIN_RESIDUALS, TRADING_DAYS};
use crate::binomial::{build_lattice, BinomialLattice};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, stream, Execution, Purpose};
use crate::grid::TimeGrid;
use crate::ledger::HedgeRun;
use crate::market::MarketParams;
use crate::payoff::Payoff;
use crate::schedule::RiskAversionSchedule;
use crate::stats::{CoMoments, Moments};

/// Call struck at `1 / moneyness` on a unit spot, maturing after `maturity_days` daily steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    /// Spot over strike.
    pub moneyness: f64,
    pub maturity_days: usize,
}

impl OptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.moneyness.is_finite() && self.moneyness > 0.0) {
            return Err(Error::param(
                "moneyness",
                format!("must be positive, got {}", self.moneyness),
            ));
        }
        if self.maturity_days == 0 {
            return Err(Error::param("maturity_days", "must be at least 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.maturity_days, self.maturity_days as f64 / TRADING_DAYS)
    }

    pub fn horizon(&self) -> f64 {
        self.maturity_days as f64 / TRADING_DAYS
    }
}

/// Lattice on a unit spot built from the series estimates, as used by the calibration.
///
/// The arithmetic drift is the log-return drift plus half the variance.
pub fn calibration_lattice(est: &PhEstimate, option: &OptionSpec, rate: f64) -> Result<BinomialLattice> {
    option.validate()?;
    let drift = est.mu_hat + 0.5 * est.sigma_hat * est.sigma_hat;
    let market = MarketParams::new(drift, est.sigma_hat, rate, 1.0)?;
    build_lattice(
        &market,
        option.grid()?,
        est.p_hat,
        &Payoff::call(1.0 / option.moneyness)?,
    )
}

/// Per-step residuals per unit spot, `U_k / S_k`, observed across paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPanel {
    pub steps: Vec<Moments>,
}

impl ResidualPanel {
    pub fn from_run(run: &HedgeRun) -> Self {
        Self {
            steps: run.stats.steps.iter().map(|s| s.unit).collect(),
        }
    }

    /// Aggregates a hedge ledger CSV (`step`, `spot` and `residual` columns).
    pub fn from_ledger_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Input(format!("ledger csv: {e}")))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Input(format!("ledger csv lacks a `{name}` column")))
        };
        let (c_step, c_spot, c_res) = (col("step")?, col("spot")?, col("residual")?);
        let mut steps: Vec<Moments> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(format!("ledger csv: {e}")))?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::Input(format!("ledger row {}: {e}", i + 2)))
            };
            let k = field(c_step)? as usize;
            let (spot, residual) = (field(c_spot)?, field(c_res)?);
            if steps.len() <= k {
                steps.resize(k + 1, Moments::default());
            }
            steps[k].push(residual / spot);
        }
        if steps.is_empty() {
            return Err(Error::InsufficientObservations {
                got: 0,
                need: MIN_RESIDUALS,
            });
        }
        Ok(Self { steps })
    }

    fn validate(&self, n_steps: usize) -> Result<()> {
        if self.steps.len() != n_steps {
            return Err(Error::param(
                "residuals",
                format!("panel has {} steps, option needs {n_steps}", self.steps.len()),
            ));
        }
        let least = self.steps.iter().map(|m| m.n).min().unwrap_or(0) as usize;
        if least < MIN_RESIDUALS {
            return Err(Error::InsufficientObservations {
                got: least,
                need: MIN_RESIDUALS,
            });
        }
        Ok(())
    }
}

/// What the simulated residual distribution is matched to.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// A residual panel from a hedger whose schedule is to be recovered.
    Panel(ResidualPanel),
    /// Residuals the risk-neutral lattice hedge realised on the series itself,
    /// over every window of the option's length.
    Historical,
}

/// How the calibration simulates price paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathModel {
    /// Paths on the lattice nodes with the estimated up-probability.
    Lattice,
    /// Log-normal daily returns with the estimated moments, hedged at interpolated lattice values.
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_start: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gamma_min: 0.0,
            gamma_max: 10.0,
            gamma_start: 1.0,
            tol: 1e-3,
            max_iter: 50,
            damping: 0.5,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_min >= 0.0 && self.gamma_max > self.gamma_min && self.gamma_max.is_finite()) {
            return Err(Error::param("gamma_range", "need 0 <= gamma_min < gamma_max"));
        }
        if !(self.gamma_start >= self.gamma_min && self.gamma_start <= self.gamma_max) {
            return Err(Error::param("gamma_start", "must lie in the gamma range"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub rate: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Defaults to lattice paths for a panel target and log-normal paths for history.
    pub path_model: Option<PathModel>,
    pub solver: SolverParams,
    pub execution: Execution,
}

impl CalibrationConfig {
    pub fn new(rate: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            rate,
            n_paths,
            seed,
            path_model: None,
            solver: SolverParams::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub gamma_initial: f64,
    pub gamma_end: f64,
    /// Normal fit of the simulated residuals per unit spot at `gamma_initial`, averaged over steps.
    pub fitted_mean: f64,
    pub fitted_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiPoint {
    pub tau_days: f64,
    pub implied: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub gamma: f64,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    pub psi_at_grid: Vec<PsiPoint>,
    pub estimate: PhEstimate,
    pub option: OptionSpec,
    pub path_model: PathModel,
    /// Moment used to invert the residual law.
    pub method: &'static str,
}

impl CalibrationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration result serializes")
    }
}

/// Lattice values and risk-neutral deltas at arbitrary spots, linear in log-spot
/// between nodes and linearly extrapolated beyond the outermost nodes.
struct LatticeHedger<'a> {
    lattice: &'a BinomialLattice,
    payoff: Payoff,
    log_up: f64,
    log_down: f64,
}

impl<'a> LatticeHedger<'a> {
    fn new(lattice: &'a BinomialLattice, payoff: Payoff) -> Self {
        Self {
            lattice,
            payoff,
            log_up: lattice.step_model.up.ln(),
            log_down: lattice.step_model.down.ln(),
        }
    }

    /// `(value, rn delta)` at step `k` and spot `s`; the delta is zero at maturity.
    fn eval(&self, k: usize, s: f64) -> Result<(f64, f64)> {
        let l = self.lattice;
        if k == l.n_steps() {
            return Ok((self.payoff.eval_checked(s)?, 0.0));
        }
        if k == 0 {
            let (p, v, d) = (l.price(0, 0)?, l.value(0, 0)?, l.rn_delta(0, 0)?);
            return Ok((v + d * (s - p), d));
        }
        let x = (s / l.spot).ln();
        let pos = (x - k as f64 * self.log_down) / (self.log_up - self.log_down);
        if pos <= 0.0 || pos >= k as f64 {
            let j = if pos <= 0.0 { 0 } else { k };
            let (p, v, d) = (l.price(k, j)?, l.value(k, j)?, l.rn_delta(k, j)?);
            return Ok((v + d * (s - p), d));
        }
        let j = (pos.floor() as usize).min(k - 1);
        let w = pos - j as f64;
        let v = (1.0 - w) * l.value(k, j)? + w * l.value(k, j + 1)?;
        let d = (1.0 - w) * l.rn_delta(k, j)? + w * l.rn_delta(k, j + 1)?;
        Ok((v, d))
    }

    /// Excess return and risk-neutral residual per unit spot over one step.
    fn step(&self, k: usize, s: f64, s1: f64, growth: f64) -> Result<(f64, f64)> {
        let (f, d) = self.eval(k, s)?;
        let (f1, _) = self.eval(k + 1, s1)?;
        let excess = s1 / s - 1.0 - growth;
        let residual = d * (s1 - s) - (f1 - f) - growth * (d * s - f);
        Ok((excess, residual / s))
    }
}

/// Residual per unit spot of the risk-neutral hedge over every window of the series,
/// with the normalized spots each window visits.
fn historical_panel(
    series: &PriceSeries,
    hedger: &LatticeHedger,
    n: usize,
    growth: f64,
) -> Result<(ResidualPanel, Vec<Vec<f64>>)> {
    let closes: Vec<f64> = series.closes().collect();
    if closes.len() <= n {
        return Err(Error::InsufficientObservations {
            got: closes.len(),
            need: n + 1,
        });
    }
    let mut steps = vec![Moments::default(); n];
    let mut states = Vec::with_capacity(closes.len() - n);
    for start in 0..closes.len() - n {
        let base = closes[start];
        let path: Vec<f64> = closes[start..start + n].iter().map(|c| c / base).collect();
        for (k, m) in steps.iter_mut().enumerate() {
            m.push(hedger.step(k, path[k], closes[start + k + 1] / base, growth)?.1);
        }
        states.push(path);
    }
    Ok((ResidualPanel { steps }, states))
}

fn next_spot<R: Rng>(rng: &mut R, model: PathModel, l: &BinomialLattice, est: &PhEstimate, s: f64) -> f64 {
    let h = l.grid.step();
    match model {
        PathModel::Lattice => {
            s * if rng.random::<f64>() < l.step_model.p_up {
                l.step_model.up
            } else {
                l.step_model.down
            }
        }
        PathModel::LogNormal => {
            let z: f64 = rng.sample(StandardNormal);
            s * (est.mu_hat * h + est.sigma_hat * h.sqrt() * z).exp()
        }
    }
}

fn merge_chunks(chunks: Vec<Result<Vec<CoMoments>>>, n: usize) -> Result<Vec<CoMoments>> {
    let mut acc = vec![CoMoments::default(); n];
    for c in chunks {
        for (a, b) in acc.iter_mut().zip(c?.iter()) {
            a.merge(b);
        }
    }
    Ok(acc)
}

/// One-step co-moments drawn from the states the history actually visited, about
/// `n_paths` draws per step spread evenly over the windows.
fn simulate_from_states(
    hedger: &LatticeHedger,
    est: &PhEstimate,
    model: PathModel,
    states: &[Vec<f64>],
    growth: f64,
    config: &CalibrationConfig,
) -> Result<Vec<CoMoments>> {
    if config.n_paths < MIN_RESIDUALS {
        return Err(Error::param("n_paths", format!("need at least {MIN_RESIDUALS} paths")));
    }
    let n = states.first().map_or(0, Vec::len);
    let draws = config.n_paths.div_ceil(states.len().max(1));
    let chunks = map_chunks(states.len(), config.execution, |range| -> Result<Vec<CoMoments>> {
        let mut acc = vec![CoMoments::default(); n];
        for i in range {
            let mut rng = stream(config.seed, Purpose::Calibration, i as u64);
            for (k, a) in acc.iter_mut().enumerate() {
                let s = states[i][k];
                for _ in 0..draws {
                    let s1 = next_spot(&mut rng, model, hedger.lattice, est, s);
                    let (e, w) = hedger.step(k, s, s1, growth)?;
                    a.push(e, w);
                }
            }
        }
        Ok(acc)
    });
    merge_chunks(chunks, n)
}

/// Simulated `(excess return, rn residual)` co-moments per step. The tilted
/// hedger's residual per unit spot is `psi_k * excess + rn residual` on the same path.
fn simulate_components(
    hedger: &LatticeHedger,
    est: &PhEstimate,
    model: PathModel,
    n: usize,
    growth: f64,
    config: &CalibrationConfig,
) -> Result<Vec<CoMoments>> {
    if config.n_paths < MIN_RESIDUALS {
        return Err(Error::param("n_paths", format!("need at least {MIN_RESIDUALS} paths")));
    }
    let chunks = map_chunks(config.n_paths, config.execution, |range| -> Result<Vec<CoMoments>> {
        let mut acc = vec![CoMoments::default(); n];
        for i in range {
            let mut rng = stream(config.seed, Purpose::Calibration, i as u64);
            let mut s = 1.0;
            for (k, a) in acc.iter_mut().enumerate() {
                let s1 = next_spot(&mut rng, model, hedger.lattice, est, s);
                let (e, w) = hedger.step(k, s, s1, growth)?;
                a.push(e, w);
                s = s1;
            }
        }
        Ok(acc)
    });
    merge_chunks(chunks, n)
}

/// Tilt whose simulated residual variance matches the observed one: the larger root of
/// `ve psi^2 + 2 c psi + vw = target`. A shortfall `target < vw` is mirrored to a negative
/// tilt of the same size, so noise around a zero tilt averages out in the fit instead of
/// being truncated upwards.
fn implied_psi(sim: &CoMoments, target_var: f64) -> f64 {
    let (ve, vw, c) = sim.covariance_mle();
    if !(ve > 0.0) {
        return 0.0;
    }
    let excess = target_var - vw;
    let disc = c * c + ve * excess.abs();
    let root = ((-c + disc.sqrt()) / ve).max(0.0);
    if excess >= 0.0 {
        root
    } else {
        -root
    }
}

fn psi_curve(gamma: f64, taus: &[f64], horizon: f64) -> Result<Vec<f64>> {
    let s = RiskAversionSchedule::exponential(gamma, horizon)?;
    taus.iter().map(|&t| s.psi(t)).collect()
}

/// Least-squares intensity of the exponential family through the implied tilts:
/// a scan of the range followed by golden-section refinement.
fn fit_gamma(implied: &[f64], taus: &[f64], horizon: f64, solver: &SolverParams) -> Result<f64> {
    if implied.iter().all(|&p| p <= 0.0) {
        return Ok(solver.gamma_min);
    }
    let sse = |g: f64| -> Result<f64> {
        Ok(psi_curve(g, taus, horizon)?
            .iter()
            .zip(implied)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    };
    const SCAN: usize = 1000;
    let (lo, hi) = (solver.gamma_min, solver.gamma_max);
    let at = |i: usize| lo + (hi - lo) * i as f64 / SCAN as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=SCAN {
        let v = sse(at(i))?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let (mut a, mut b) = (at(best.0.saturating_sub(1)), at((best.0 + 1).min(SCAN)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (sse(x1)?, sse(x2)?);
    while b - a > 1e-10 * (1.0 + b.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse(x2)?;
        }
    }
    let g = 0.5 * (a + b);
    // keep the scan optimum unless refinement strictly improves on it, e.g. at a range edge
    Ok(if sse(g)? < best.1 { g } else { at(best.0) })
}

/// Risk-aversion intensity at which simulated hedge residuals match the target.
///
/// Each iteration simulates the hedger with `gamma_initial`, fits a normal law to
/// the residuals per step, inverts the variance relation for the tilt `psi(tau_k)`,
/// and fits the exponential family to get `gamma_end`; then
/// `gamma <- gamma + damping (gamma_end - gamma)`. The same seed is used on every
/// iteration, so the paths are common to all of them.
pub fn calibrate_gamma(
    series: &PriceSeries,
    option: &OptionSpec,
    target: &Target,
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    option.validate()?;
    config.solver.validate()?;
    let est = estimate_ph(series)?;
    let lattice = calibration_lattice(&est, option, config.rate)?;
    let payoff = Payoff::call(1.0 / option.moneyness)?;
    let hedger = LatticeHedger::new(&lattice, payoff);
    let n = option.maturity_days;
    let grid = option.grid()?;
    let horizon = grid.horizon();
    let growth = (config.rate * grid.step()).exp_m1();

    let path_model = config.path_model.unwrap_or(match target {
        Target::Panel(_) => PathModel::Lattice,
        Target::Historical => PathModel::LogNormal,
    });
    let (observed, sim) = match target {
        Target::Panel(p) => {
            p.validate(n)?;
            (
                p.clone(),
                simulate_components(&hedger, &est, path_model, n, growth, config)?,
            )
        }
        Target::Historical => {
            let (panel, states) = historical_panel(series, &hedger, n, growth)?;
            let sim = simulate_from_states(&hedger, &est, path_model, &states, growth, config)?;
            (panel, sim)
        }
    };

    let taus: Vec<f64> = (0..n).map(|k| grid.tau(k)).collect();
    let implied: Vec<f64> = sim
        .iter()
        .zip(&observed.steps)
        .map(|(s, o)| implied_psi(s, o.variance_mle()))
        .collect();
    let gamma_end = fit_gamma(&implied, &taus, horizon, &config.solver)?;

    let solver = &config.solver;
    let mut gamma = solver.gamma_start;
    let mut iterations = Vec::new();
    let mut converged = false;
    for _ in 0..solver.max_iter {
        let psi = psi_curve(gamma, &taus, horizon)?;
        let (mut fm, mut fs) = (0.0, 0.0);
        for (s, &p) in sim.iter().zip(&psi) {
            let (ve, vw, c) = s.covariance_mle();
            fm += p * s.mean_x + s.mean_y;
            fs += (p * p * ve + 2.0 * p * c + vw).max(0.0).sqrt();
        }
        iterations.push(IterationRecord {
            gamma_initial: gamma,
            gamma_end,
            fitted_mean: fm / n as f64,
            fitted_std: fs / n as f64,
        });
        if (gamma_end - gamma).abs() <= solver.tol {
            gamma = gamma_end;
            converged = true;
            break;
        }
        gamma = (gamma + solver.damping * (gamma_end - gamma)).clamp(solver.gamma_min, solver.gamma_max);
    }

    let fitted = psi_curve(gamma, &taus, horizon)?;
    let psi_at_grid = (0..n)
        .map(|k| PsiPoint {
            tau_days: (n - k) as f64,
            implied: implied[k],
            fitted: fitted[k],
        })
        .collect();
    Ok(CalibrationResult {
        gamma,
        converged,
        iterations,
        psi_at_grid,
        estimate: est,
        option: *option,
        path_model,
        method: "std",
    })
}
