use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use mvhedge::binomial::{build_lattice, simulate_hedge, BinomialLattice, KsrfStepModel};
use mvhedge::calibration::{
    calibrate_gamma, gamma_surface, psi_surface, CalibrationConfig, PriceSeries, ResidualPanel, Target,
};
use mvhedge::diffusion::{pde_price_grid, simulate_hedge_diffusion, PdeGrid, PricingSurface};
use mvhedge::jumpdiff::{jump_price, simulate_hedge_jump, McClaim, MonomialClaim, TwoAssetClaim};
use mvhedge::multifactor::{mc_price_and_partials, simulate_hedge_multifactor};
use mvhedge::{HedgeRun, Payoff, SimulationConfig};

use crate::config::{DiffusionPricer, ModelKind, PayoffKind, ScenarioConfig};
use crate::failure::Failure;

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub model: Option<ModelKind>,
    pub prices: Option<PathBuf>,
    pub residuals: Option<PathBuf>,
}

pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub out: PathBuf,
}

impl Scenario {
    pub fn new(mut cfg: ScenarioConfig, o: Overrides, out: PathBuf) -> Self {
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(m) = o.model {
            cfg.model = m;
        }
        if let Some(n) = o.paths {
            cfg.simulation.n_paths = n;
            cfg.mc.n_paths = n;
            cfg.calibration.n_paths = n;
        }
        if o.prices.is_some() {
            cfg.calibration.prices_csv = o.prices;
        }
        if o.residuals.is_some() {
            cfg.calibration.residuals_csv = o.residuals;
        }
        Self { cfg, out }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::validation(format!("cannot create output directory {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))
    }

    fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let mut w = self.create(name)?;
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::validation(format!("cannot write {name}: {e}")))?;
        Ok(self.out.join(name))
    }

    fn lattice(&self) -> Result<BinomialLattice, Failure> {
        let cfg = &self.cfg;
        let market = cfg.binomial.market()?;
        let grid = cfg.grid.grid()?;
        let p = cfg
            .binomial
            .p_up
            .unwrap_or_else(|| KsrfStepModel::crr_probability(&market, grid.step()));
        Ok(build_lattice(&market, grid, p, &cfg.payoff.single()?)?)
    }

    fn diffusion_surface(&self, payoff: &Payoff) -> Result<PricingSurface, Failure> {
        let d = &self.cfg.diffusion;
        let model = d.model()?;
        let horizon = self.cfg.grid.maturity_years;
        match d.pricer {
            DiffusionPricer::ClosedForm => Ok(PricingSurface::closed_form(&model, payoff, horizon)?),
            DiffusionPricer::Pde => {
                let scale = payoff.strike().unwrap_or(d.spot);
                let grid = PdeGrid::uniform(d.pde_upper_multiple * scale, d.pde_space_steps, d.pde_time_steps)?;
                Ok(pde_price_grid(&model, payoff, horizon, &grid)?)
            }
        }
    }

    fn jump_claim(&self) -> Result<Box<dyn TwoAssetClaim>, Failure> {
        let cfg = &self.cfg;
        let horizon = cfg.grid.maturity_years;
        Ok(match cfg.payoff.kind {
            PayoffKind::Monomial => {
                let p = &cfg.payoff;
                Box::new(MonomialClaim::new(p.scale, p.power1, p.power2, horizon))
            }
            _ => Box::new(McClaim {
                payoff: cfg.payoff.two_asset()?,
                pricing: cfg.mc.jump(cfg.seed)?,
                horizon,
            }),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceRow {
    pub quantity: &'static str,
    pub value: f64,
}

pub const PRICE_HEADER: &str = "model,quantity,value";

fn price_rows(sc: &Scenario) -> Result<Vec<PriceRow>, Failure> {
    let cfg = &sc.cfg;
    let row = |quantity, value| PriceRow { quantity, value };
    let horizon = cfg.grid.maturity_years;
    match cfg.model {
        ModelKind::Binomial => {
            let l = sc.lattice()?;
            Ok(vec![
                row("value", l.premium()),
                row("rn_delta", l.rn_delta(0, 0)?),
                row("p_up", l.step_model.p_up),
                row("q", l.q),
            ])
        }
        ModelKind::Diffusion => {
            let payoff = cfg.payoff.single()?;
            let p = sc.diffusion_surface(&payoff)?.eval(cfg.diffusion.spot, 0.0)?;
            Ok(vec![
                row("value", p.value),
                row("delta", p.delta),
                row("gamma", p.gamma),
                row("theta", p.theta),
            ])
        }
        ModelKind::Sv | ModelKind::Vov => {
            let model = if cfg.model == ModelKind::Sv {
                cfg.sv.model()?
            } else {
                cfg.vov.model()?
            };
            let payoff = cfg.payoff.single()?;
            let p = mc_price_and_partials(
                &model,
                &payoff,
                &cfg.mc.multifactor(cfg.seed)?,
                &model.initial_state(),
                0.0,
                horizon,
            )?;
            let mut rows = vec![
                row("value", p.value),
                row("std_error", p.std_error),
                row("d_spot", p.d_spot),
                row("d_vol", p.d_vol),
            ];
            if let Some(d) = p.d_vov {
                rows.push(row("d_vov", d));
            }
            Ok(rows)
        }
        ModelKind::Jump => {
            let model = cfg.jump.model(horizon)?;
            let (q, se) = match cfg.payoff.kind {
                PayoffKind::Monomial => (sc.jump_claim()?.quote(&model, model.spot, 0.0)?, 0.0),
                _ => {
                    let p = jump_price(
                        &model,
                        &cfg.payoff.two_asset()?,
                        &cfg.mc.jump(cfg.seed)?,
                        model.spot,
                        0.0,
                        horizon,
                    )?;
                    (p.quote, p.std_error)
                }
            };
            Ok(vec![
                row("value", q.value),
                row("std_error", se),
                row("d_spot1", q.d1),
                row("d_spot2", q.d2),
                row("displaced_value", q.displaced),
            ])
        }
    }
}

fn check_finite(rows: &[PriceRow]) -> Result<(), Failure> {
    match rows.iter().find(|r| !r.value.is_finite()) {
        Some(r) => Err(Failure::numerical(format!("non-finite {}", r.quantity))),
        None => Ok(()),
    }
}

pub fn cmd_price(sc: &Scenario) -> Result<Vec<PathBuf>, Failure> {
    let rows = price_rows(sc)?;
    check_finite(&rows)?;
    let model = sc.cfg.model.name();
    let path = sc.write(&sc.cfg.outputs.price, |w| {
        writeln!(w, "{PRICE_HEADER}")?;
        for r in &rows {
            writeln!(w, "{model},{},{}", r.quantity, r.value)?;
        }
        Ok(())
    })?;
    for r in &rows {
        println!("{:<16} {:>16.8}", r.quantity, r.value);
    }
    Ok(vec![path])
}

fn hedge_run(sc: &Scenario) -> Result<HedgeRun, Failure> {
    let cfg = &sc.cfg;
    let grid = cfg.grid.grid()?;
    let schedule = cfg.schedule.schedule(grid.horizon())?;
    let sim = SimulationConfig::new(cfg.simulation.n_paths, cfg.seed).keep(cfg.simulation.keep_ledgers);
    Ok(match cfg.model {
        ModelKind::Binomial => simulate_hedge(&sc.lattice()?, &schedule, &sim)?,
        ModelKind::Diffusion => {
            let payoff = cfg.payoff.single()?;
            let surface = sc.diffusion_surface(&payoff)?;
            simulate_hedge_diffusion(&cfg.diffusion.model()?, &surface, &payoff, &schedule, grid, &sim)?
        }
        ModelKind::Sv | ModelKind::Vov => {
            let model = if cfg.model == ModelKind::Sv {
                cfg.sv.model()?
            } else {
                cfg.vov.model()?
            };
            let payoff = cfg.payoff.single()?;
            simulate_hedge_multifactor(&model, &payoff, &cfg.mc.multifactor(cfg.seed)?, &schedule, grid, &sim)?
        }
        ModelKind::Jump => {
            let model = cfg.jump.model(grid.horizon())?;
            simulate_hedge_jump(&model, sc.jump_claim()?.as_ref(), &schedule, grid, &sim)?
        }
    })
}

pub fn cmd_hedge(sc: &Scenario) -> Result<Vec<PathBuf>, Failure> {
    let run = hedge_run(sc)?;
    let s = &run.summary;
    if !(s.premium.is_finite() && s.terminal_hedge_error.rms.is_finite()) {
        return Err(Failure::numerical("non-finite hedge statistics"));
    }
    let ledger = sc.write(&sc.cfg.outputs.ledger, |w| run.write_ledger_csv(w))?;
    let summary = sc.write(&sc.cfg.outputs.summary, |w| writeln!(w, "{}", s.to_json()))?;
    println!("premium                {:.8}", s.premium);
    println!("max |residual|/premium {:.3e}", s.max_abs_residual_over_premium);
    println!("terminal error rms     {:.8}", s.terminal_hedge_error.rms);
    Ok(vec![ledger, summary])
}

#[derive(Serialize)]
struct SurfaceReport<'a> {
    failures: &'a [mvhedge::calibration::CellFailure],
    monotonicity_violations: &'a [(usize, f64, f64)],
}

pub fn cmd_calibrate(sc: &Scenario) -> Result<Vec<PathBuf>, Failure> {
    let c = &sc.cfg.calibration;
    let prices = c.prices_csv.as_deref().ok_or_else(|| {
        Failure::validation("calibration: invalid parameter `prices_csv`: a price series is required (--prices)")
    })?;
    let series = PriceSeries::from_csv_path(prices)?;
    let target = match &c.residuals_csv {
        Some(p) => Target::Panel(read_panel(p)?),
        None => Target::Historical,
    };
    let config = CalibrationConfig {
        path_model: c.path_model(),
        solver: c.solver()?,
        ..CalibrationConfig::new(c.rate_annual, c.n_paths, sc.cfg.seed)
    };
    let result = calibrate_gamma(&series, &c.option()?, &target, &config)?;
    if !result.gamma.is_finite() {
        return Err(Failure::numerical("non-finite risk-aversion intensity"));
    }
    let mut written = vec![sc.write(&sc.cfg.outputs.calibration, |w| writeln!(w, "{}", result.to_json()))?];
    if result.converged {
        println!("gamma {:.6} after {} iterations", result.gamma, result.iterations.len());
    } else {
        eprintln!(
            "warning: no convergence after {} iterations, last gamma {:.6}",
            result.iterations.len(),
            result.gamma
        );
    }

    if !c.surface_moneyness.is_empty() || !c.surface_maturity_days.is_empty() {
        let surface = gamma_surface(&series, &c.surface_moneyness, &c.surface_maturity_days, &config)?;
        written.push(sc.write(&sc.cfg.outputs.gamma_surface, |w| surface.grid.write_csv(w))?);
        let report = SurfaceReport {
            failures: &surface.failures,
            monotonicity_violations: &surface.monotonicity_violations,
        };
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        written.push(sc.write(&sc.cfg.outputs.gamma_report, |w| writeln!(w, "{json}"))?);
        for f in &surface.failures {
            eprintln!(
                "warning: cell moneyness {} maturity {}d flagged: {}",
                f.moneyness, f.maturity_days, f.reason
            );
        }
        if surface.all_failed() {
            return Err(Failure::all_cells_failed(format!(
                "all {} surface cells failed",
                surface.failures.len()
            )));
        }
    }
    Ok(written)
}

fn read_panel(path: &Path) -> Result<ResidualPanel, Failure> {
    let f =
        File::open(path).map_err(|e| Failure::validation(format!("cannot read residuals {}: {e}", path.display())))?;
    Ok(ResidualPanel::from_ledger_csv(std::io::BufReader::new(f))?)
}

pub fn cmd_surface(sc: &Scenario) -> Result<Vec<PathBuf>, Failure> {
    let s = &sc.cfg.surface;
    let grid =
        psi_surface(&s.gammas, &s.tau_days, s.horizon_days).map_err(|e| Failure::from_engine(e).context("surface"))?;
    Ok(vec![sc.write(&sc.cfg.outputs.psi_surface, |w| grid.write_csv(w))?])
}
