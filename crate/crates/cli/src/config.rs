//! Scenario files. Keys carry their units: `_annual` rates are per year,
//! `_years` and `_days` are times, `_days` always counting trading days.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use mvhedge::calibration::{OptionSpec, PathModel, SolverParams};
use mvhedge::diffusion::DiffusionModel;
use mvhedge::jumpdiff::{Displacement, JumpModel, JumpPayoff, JumpPricing};
use mvhedge::multifactor::{DcForm, McPricing, MultifactorModel, StateFn, SvModel, VovModel};
use mvhedge::{MarketParams, ParamSchedule, Payoff, PsiFamily, RiskAversionSchedule, TimeGrid};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Binomial,
    Diffusion,
    Sv,
    Vov,
    Jump,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Binomial => "binomial",
            ModelKind::Diffusion => "diffusion",
            ModelKind::Sv => "sv",
            ModelKind::Vov => "vov",
            ModelKind::Jump => "jump",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub binomial: BinomialSection,
    pub diffusion: DiffusionSection,
    pub sv: SvSection,
    pub vov: VovSection,
    pub jump: JumpSection,
    pub payoff: PayoffSection,
    pub grid: GridSection,
    pub schedule: ScheduleSection,
    pub simulation: SimulationSection,
    pub mc: McSection,
    pub calibration: CalibrationSection,
    pub surface: SurfaceSection,
    pub outputs: OutputSection,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::validation(format!("config {}: {}", path.display(), e.message())))
    }
}

fn in_section<T>(section: &str, r: mvhedge::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::from_engine(e).context(section))
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinomialSection {
    pub spot: f64,
    pub drift_annual: f64,
    pub volatility_annual: f64,
    pub rate_annual: f64,
    /// Up-probability per step; defaults to the probability under which the tree converges to log-normal.
    pub p_up: Option<f64>,
}

impl Default for BinomialSection {
    fn default() -> Self {
        Self {
            spot: 100.0,
            drift_annual: 0.08,
            volatility_annual: 0.2,
            rate_annual: 0.01,
            p_up: None,
        }
    }
}

impl BinomialSection {
    pub fn market(&self) -> Result<MarketParams, Failure> {
        in_section(
            "binomial",
            MarketParams::new(self.drift_annual, self.volatility_annual, self.rate_annual, self.spot),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionPricer {
    #[default]
    ClosedForm,
    Pde,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub spot: f64,
    pub drift_annual: f64,
    pub volatility_annual: f64,
    pub rate_annual: f64,
    pub pricer: DiffusionPricer,
    pub pde_space_steps: usize,
    pub pde_time_steps: usize,
    /// Upper spot boundary as a multiple of the strike (or spot, without one).
    pub pde_upper_multiple: f64,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        Self {
            spot: 100.0,
            drift_annual: 0.08,
            volatility_annual: 0.2,
            rate_annual: 0.01,
            pricer: DiffusionPricer::ClosedForm,
            pde_space_steps: 400,
            pde_time_steps: 400,
            pde_upper_multiple: 4.0,
        }
    }
}

impl DiffusionSection {
    pub fn model(&self) -> Result<DiffusionModel, Failure> {
        in_section(
            "diffusion",
            DiffusionModel::constant(self.drift_annual, self.volatility_annual, self.rate_annual, self.spot),
        )
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvSection {
    pub spot: f64,
    pub drift_annual: f64,
    pub rate_annual: f64,
    pub vol_state: f64,
    pub vol_drift_annual: f64,
    pub vol_volatility_annual: f64,
    pub rho: f64,
    pub h: StateFn,
}

impl Default for SvSection {
    fn default() -> Self {
        Self {
            spot: 100.0,
            drift_annual: 0.08,
            rate_annual: 0.01,
            vol_state: 0.04,
            vol_drift_annual: 0.0,
            vol_volatility_annual: 0.3,
            rho: -0.5,
            h: StateFn::Sqrt,
        }
    }
}

impl SvSection {
    pub fn model(&self) -> Result<MultifactorModel, Failure> {
        let m = MultifactorModel::Sv(SvModel {
            drift: ParamSchedule::constant(self.drift_annual),
            vol_drift: ParamSchedule::constant(self.vol_drift_annual),
            vol_vol: ParamSchedule::constant(self.vol_volatility_annual),
            rate: ParamSchedule::constant(self.rate_annual),
            rho: self.rho,
            h: self.h,
            spot: self.spot,
            vol_state: self.vol_state,
        });
        in_section("sv", m.validate())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VovSection {
    pub spot: f64,
    pub drift_annual: f64,
    pub rate_annual: f64,
    pub vol_state: f64,
    pub vol_drift_annual: f64,
    pub vov_state: f64,
    pub vov_drift_annual: f64,
    pub vov_volatility_annual: f64,
    pub rho_v: f64,
    pub rho_w: f64,
    pub rho_vw: f64,
    pub h: StateFn,
    pub g: StateFn,
    pub dc_form: DcForm,
}

impl Default for VovSection {
    fn default() -> Self {
        Self {
            spot: 100.0,
            drift_annual: 0.08,
            rate_annual: 0.01,
            vol_state: 0.04,
            vol_drift_annual: 0.0,
            vov_state: 0.09,
            vov_drift_annual: 0.0,
            vov_volatility_annual: 0.2,
            rho_v: -0.5,
            rho_w: 0.1,
            rho_vw: 0.2,
            h: StateFn::Sqrt,
            g: StateFn::Sqrt,
            dc_form: DcForm::Consistent,
        }
    }
}

impl VovSection {
    pub fn model(&self) -> Result<MultifactorModel, Failure> {
        let m = MultifactorModel::Vov(VovModel {
            drift: ParamSchedule::constant(self.drift_annual),
            vol_drift: ParamSchedule::constant(self.vol_drift_annual),
            vov_drift: ParamSchedule::constant(self.vov_drift_annual),
            vov_vol: ParamSchedule::constant(self.vov_volatility_annual),
            rate: ParamSchedule::constant(self.rate_annual),
            rho_v: self.rho_v,
            rho_w: self.rho_w,
            rho_vw: self.rho_vw,
            h: self.h,
            g: self.g,
            spot: self.spot,
            vol_state: self.vol_state,
            vov_state: self.vov_state,
            dc_form: self.dc_form,
        });
        in_section("vov", m.validate())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementKind {
    #[default]
    Proportional,
    Additive,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpSection {
    pub spot1: f64,
    pub spot2: f64,
    pub drift1_annual: f64,
    pub drift2_annual: f64,
    pub volatility1_annual: f64,
    pub volatility2_annual: f64,
    /// Relative price jumps of each asset when the common Poisson clock ticks.
    pub jump1: f64,
    pub jump2: f64,
    pub intensity_annual: f64,
    pub rate_annual: f64,
    pub maturity2_years: f64,
    pub displacement: DisplacementKind,
}

impl Default for JumpSection {
    fn default() -> Self {
        Self {
            spot1: 100.0,
            spot2: 100.0,
            drift1_annual: 0.08,
            drift2_annual: 0.05,
            volatility1_annual: 0.2,
            volatility2_annual: 0.1,
            jump1: -0.1,
            jump2: 0.05,
            intensity_annual: 1.0,
            rate_annual: 0.01,
            maturity2_years: 2.0,
            displacement: DisplacementKind::Proportional,
        }
    }
}

impl JumpSection {
    pub fn model(&self, horizon: f64) -> Result<JumpModel, Failure> {
        let m = JumpModel::constant(
            [self.drift1_annual, self.drift2_annual],
            [self.volatility1_annual, self.volatility2_annual],
            [self.jump1, self.jump2],
            self.intensity_annual,
            self.rate_annual,
            [self.spot1, self.spot2],
            self.maturity2_years,
        )
        .with_displacement(match self.displacement {
            DisplacementKind::Proportional => Displacement::Proportional,
            DisplacementKind::Additive => Displacement::Additive,
        });
        in_section("jump", m.validate(horizon))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    #[default]
    Call,
    Put,
    Constant,
    /// Two-asset claims, jump model only.
    Exchange,
    Monomial,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffSection {
    pub kind: PayoffKind,
    pub strike: f64,
    pub amount: f64,
    /// `scale * S1^power1 * S2^power2` for the monomial claim.
    pub scale: f64,
    pub power1: f64,
    pub power2: f64,
}

impl Default for PayoffSection {
    fn default() -> Self {
        Self {
            kind: PayoffKind::Call,
            strike: 100.0,
            amount: 0.0,
            scale: 1.0,
            power1: 1.0,
            power2: 0.0,
        }
    }
}

impl PayoffSection {
    pub fn single(&self) -> Result<Payoff, Failure> {
        let p = match self.kind {
            PayoffKind::Call => Payoff::call(self.strike),
            PayoffKind::Put => Payoff::put(self.strike),
            PayoffKind::Constant => Payoff::constant(self.amount),
            PayoffKind::Exchange | PayoffKind::Monomial => {
                return Err(Failure::validation(
                    "payoff: invalid parameter `kind`: two-asset claims need the jump model",
                ))
            }
        };
        in_section("payoff", p)
    }

    pub fn two_asset(&self) -> Result<JumpPayoff, Failure> {
        let p = match self.kind {
            PayoffKind::Call => JumpPayoff::CallOnFirst { strike: self.strike },
            PayoffKind::Put => JumpPayoff::PutOnFirst { strike: self.strike },
            PayoffKind::Exchange => JumpPayoff::Exchange,
            PayoffKind::Constant => {
                let amount = self.amount;
                if !(amount.is_finite() && amount >= 0.0) {
                    return Err(Failure::validation(format!(
                        "payoff: invalid parameter `amount`: must be non-negative, got {amount}"
                    )));
                }
                JumpPayoff::custom(move |_, _| amount)
            }
            PayoffKind::Monomial => {
                return Err(Failure::validation(
                    "payoff: invalid parameter `kind`: monomial claims are priced in closed form, not by payoff",
                ))
            }
        };
        in_section("payoff", p.validate())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_steps: usize,
    pub maturity_years: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_steps: 160,
            maturity_years: 1.0,
        }
    }
}

impl GridSection {
    pub fn grid(&self) -> Result<TimeGrid, Failure> {
        in_section("grid", TimeGrid::new(self.n_steps, self.maturity_years))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    #[default]
    Exponential,
    Delayed,
    Zero,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub family: FamilyKind,
    pub gamma: f64,
    pub delay_years: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            family: FamilyKind::Exponential,
            gamma: 1.0,
            delay_years: 0.0,
        }
    }
}

impl ScheduleSection {
    pub fn schedule(&self, horizon: f64) -> Result<RiskAversionSchedule, Failure> {
        let family = match self.family {
            FamilyKind::Exponential => PsiFamily::Exponential,
            FamilyKind::Delayed => PsiFamily::DelayedExponential {
                delay: self.delay_years,
            },
            FamilyKind::Zero => PsiFamily::Zero,
        };
        let gamma = if self.family == FamilyKind::Zero {
            0.0
        } else {
            self.gamma
        };
        in_section("schedule", RiskAversionSchedule::new(family, gamma, horizon))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_paths: usize,
    /// Paths written in full to the ledger CSV.
    pub keep_ledgers: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            keep_ledgers: 100,
        }
    }
}

/// Inner Monte-Carlo pricer for the stochastic-volatility and jump models.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub relative_bump: f64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 20_000,
            n_steps: 50,
            relative_bump: 0.01,
        }
    }
}

impl McSection {
    pub fn multifactor(&self, seed: u64) -> Result<McPricing, Failure> {
        let p = McPricing {
            spot_bump: self.relative_bump,
            vol_bump: self.relative_bump,
            vov_bump: self.relative_bump,
            ..McPricing::new(self.n_paths, self.n_steps, seed)
        };
        in_section("mc", p.validate())?;
        Ok(p)
    }

    pub fn jump(&self, seed: u64) -> Result<JumpPricing, Failure> {
        let p = JumpPricing {
            bump: self.relative_bump,
            ..JumpPricing::new(self.n_paths, self.n_steps, seed)
        };
        in_section("mc", p.validate())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathModelKind {
    Lattice,
    LogNormal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub prices_csv: Option<PathBuf>,
    pub residuals_csv: Option<PathBuf>,
    /// Spot over strike of the calibrated call.
    pub moneyness: f64,
    pub maturity_days: usize,
    pub rate_annual: f64,
    pub n_paths: usize,
    pub path_model: Option<PathModelKind>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_start: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    /// Optional surface over these axes, written next to the single-cell trace.
    pub surface_moneyness: Vec<f64>,
    pub surface_maturity_days: Vec<usize>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let s = SolverParams::default();
        Self {
            prices_csv: None,
            residuals_csv: None,
            moneyness: 1.0,
            maturity_days: 160,
            rate_annual: 0.02,
            n_paths: 20_000,
            path_model: None,
            gamma_min: s.gamma_min,
            gamma_max: s.gamma_max,
            gamma_start: s.gamma_start,
            tolerance: s.tol,
            max_iterations: s.max_iter,
            damping: s.damping,
            surface_moneyness: Vec::new(),
            surface_maturity_days: Vec::new(),
        }
    }
}

impl CalibrationSection {
    pub fn option(&self) -> Result<OptionSpec, Failure> {
        let o = OptionSpec {
            moneyness: self.moneyness,
            maturity_days: self.maturity_days,
        };
        in_section("calibration", o.validate())?;
        Ok(o)
    }

    pub fn solver(&self) -> Result<SolverParams, Failure> {
        let s = SolverParams {
            gamma_min: self.gamma_min,
            gamma_max: self.gamma_max,
            gamma_start: self.gamma_start,
            tol: self.tolerance,
            max_iter: self.max_iterations,
            damping: self.damping,
        };
        in_section("calibration", s.validate())?;
        Ok(s)
    }

    pub fn path_model(&self) -> Option<PathModel> {
        self.path_model.map(|p| match p {
            PathModelKind::Lattice => PathModel::Lattice,
            PathModelKind::LogNormal => PathModel::LogNormal,
        })
    }
}

/// Risk-aversion intensity surface `psi(tau)` over the exponential family.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    pub gammas: Vec<f64>,
    pub tau_days: Vec<f64>,
    pub horizon_days: f64,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self {
            gammas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            tau_days: (0..=13).map(|i| 30.0 + 10.0 * i as f64).collect(),
            horizon_days: 160.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub price: String,
    pub ledger: String,
    pub summary: String,
    pub calibration: String,
    pub gamma_surface: String,
    /// Flagged cells and monotonicity notes for the intensity surface.
    pub gamma_report: String,
    pub psi_surface: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            price: "price.csv".into(),
            ledger: "ledger.csv".into(),
            summary: "summary.json".into(),
            calibration: "calibration.json".into(),
            gamma_surface: "gamma_surface.csv".into(),
            gamma_report: "gamma_surface.json".into(),
            psi_surface: "psi_surface.csv".into(),
        }
    }
}
