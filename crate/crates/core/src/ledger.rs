//! Hedge ledgers, per-step residual statistics and their CSV/JSON forms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution};
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Full per-step records are kept for this many leading paths only.
    pub keep_ledgers: usize,
    pub execution: Execution,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            keep_ledgers: 0,
            execution: Execution::default(),
        }
    }

    pub fn keep(mut self, n: usize) -> Self {
        self.keep_ledgers = n;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RecordExtra {
    None,
    Multifactor {
        vol_state: f64,
        vov_state: f64,
        b_holding: f64,
        c_holding: f64,
    },
    Jump {
        spot2: f64,
        delta2: f64,
        jumps_count: u64,
    },
}

/// One hedging step: holdings set at `t`, residual realised over `[t, t + h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub spot: f64,
    pub delta: f64,
    pub option: f64,
    pub portfolio: f64,
    pub accrual: f64,
    pub residual: f64,
    pub extra: RecordExtra,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeLedger {
    pub path: usize,
    pub records: Vec<HedgeRecord>,
    /// Tilt still carried into maturity, `(delta - rn delta) . S_T`.
    pub terminal_hedge_error: f64,
    /// Self-financing wealth of accumulated residuals, compounded at the riskless rate.
    pub cumulative_unhedged: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Single,
    Multifactor,
    Jump,
}

impl LedgerKind {
    pub fn header(self) -> &'static str {
        match self {
            LedgerKind::Single => "path,step,t,tau,spot,delta,option,portfolio,residual",
            LedgerKind::Multifactor => {
                "path,step,t,tau,spot,delta,option,portfolio,residual,vol_state,vov_state,b_holding,c_holding"
            }
            LedgerKind::Jump => "path,step,t,tau,spot,delta,option,portfolio,residual,spot2,delta2,jumps_count",
        }
    }
}

pub fn write_ledgers_csv<W: Write>(ledgers: &[HedgeLedger], kind: LedgerKind, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", kind.header())?;
    for l in ledgers {
        for r in &l.records {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                l.path, r.step, r.t, r.tau, r.spot, r.delta, r.option, r.portfolio, r.residual
            )?;
            match (kind, r.extra) {
                (
                    LedgerKind::Multifactor,
                    RecordExtra::Multifactor {
                        vol_state,
                        vov_state,
                        b_holding,
                        c_holding,
                    },
                ) => write!(out, ",{vol_state},{vov_state},{b_holding},{c_holding}")?,
                (
                    LedgerKind::Jump,
                    RecordExtra::Jump {
                        spot2,
                        delta2,
                        jumps_count,
                    },
                ) => write!(out, ",{spot2},{delta2},{jumps_count}")?,
                (LedgerKind::Multifactor, _) => write!(out, ",,,,")?,
                (LedgerKind::Jump, _) => write!(out, ",,,")?,
                _ => {}
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Observation of one step on one path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepObs {
    pub residual: f64,
    pub spot: f64,
    /// Conditional expectation of the residual given the state at the start of the step.
    pub expected: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub residual: Moments,
    /// Residual per unit of spot, `U_k / S_k`.
    pub unit: Moments,
    /// `U_k` minus its conditional expectation.
    pub excess: Moments,
    pub max_abs: f64,
}

impl StepStats {
    fn push(&mut self, o: &StepObs) {
        self.residual.push(o.residual);
        self.unit.push(o.residual / o.spot);
        self.excess.push(o.residual - o.expected);
        self.max_abs = self.max_abs.max(o.residual.abs());
    }

    fn merge(&mut self, o: &StepStats) {
        self.residual.merge(&o.residual);
        self.unit.merge(&o.unit);
        self.excess.merge(&o.excess);
        self.max_abs = self.max_abs.max(o.max_abs);
    }
}

pub(crate) struct PathOutcome {
    pub steps: Vec<StepObs>,
    pub terminal_error: f64,
    pub wealth: f64,
    pub records: Option<Vec<HedgeRecord>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub steps: Vec<StepStats>,
    pub terminal_error: Moments,
    pub terminal_abs: Moments,
    pub wealth: Moments,
}

impl Aggregate {
    fn merge(&mut self, o: &Aggregate) {
        if self.steps.is_empty() {
            self.steps = vec![StepStats::default(); o.steps.len()];
        }
        for (a, b) in self.steps.iter_mut().zip(&o.steps) {
            a.merge(b);
        }
        self.terminal_error.merge(&o.terminal_error);
        self.terminal_abs.merge(&o.terminal_abs);
        self.wealth.merge(&o.wealth);
    }

    pub fn terminal_rms(&self) -> f64 {
        let m = &self.terminal_error;
        (m.variance_mle() + m.mean * m.mean).sqrt()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |a, s| a.max(s.max_abs))
    }
}

/// Runs `path_fn` for every path in fixed chunks and merges the statistics in path order.
pub(crate) fn run_paths<F>(sim: &SimulationConfig, n_steps: usize, path_fn: F) -> Result<(Aggregate, Vec<HedgeLedger>)>
where
    F: Fn(usize, bool) -> Result<PathOutcome> + Sync + Send,
{
    sim.validate()?;
    let chunks = map_chunks(
        sim.n_paths,
        sim.execution,
        |range| -> Result<(Aggregate, Vec<HedgeLedger>)> {
            let mut agg = Aggregate {
                steps: vec![StepStats::default(); n_steps],
                ..Default::default()
            };
            let mut ledgers = Vec::new();
            for path in range {
                let keep = path < sim.keep_ledgers;
                let out = path_fn(path, keep)?;
                for (s, o) in agg.steps.iter_mut().zip(&out.steps) {
                    s.push(o);
                }
                agg.terminal_error.push(out.terminal_error);
                agg.terminal_abs.push(out.terminal_error.abs());
                agg.wealth.push(out.wealth);
                if let Some(records) = out.records {
                    ledgers.push(HedgeLedger {
                        path,
                        records,
                        terminal_hedge_error: out.terminal_error,
                        cumulative_unhedged: out.wealth,
                    });
                }
            }
            Ok((agg, ledgers))
        },
    );
    let mut total = Aggregate::default();
    let mut ledgers = Vec::new();
    for chunk in chunks {
        let (agg, l) = chunk?;
        total.merge(&agg);
        ledgers.extend(l);
    }
    Ok((total, ledgers))
}

/// Per-step fitted moments next to the model's theoretical residual law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub psi: f64,
    pub fitted_mean: f64,
    pub fitted_std: f64,
    pub unit_fitted_mean: f64,
    pub unit_fitted_std: f64,
    /// Theoretical per-unit-spot mean and std, where the model has a closed form.
    pub unit_theory_mean: Option<f64>,
    pub unit_theory_std: Option<f64>,
    /// Mean residual in excess of its conditional expectation and its standard error.
    pub excess_mean: f64,
    pub excess_std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub mean_abs: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeSummary {
    pub model: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub horizon: f64,
    pub premium: f64,
    pub max_abs_residual: f64,
    pub max_abs_residual_over_premium: f64,
    pub terminal_hedge_error: ErrorStats,
    pub cumulative_unhedged_mean: f64,
    pub cumulative_unhedged_std: f64,
    pub steps: Vec<StepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_check: Option<serde_json::Value>,
}

impl HedgeSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub(crate) struct StepTheory {
    pub t: f64,
    pub tau: f64,
    pub psi: f64,
    pub unit_mean: Option<f64>,
    pub unit_std: Option<f64>,
}

pub(crate) fn summarize(
    model: &str,
    sim: &SimulationConfig,
    horizon: f64,
    premium: f64,
    agg: &Aggregate,
    theory: impl Fn(usize) -> StepTheory,
) -> HedgeSummary {
    let steps = agg
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let th = theory(k);
            StepSummary {
                step: k,
                t: th.t,
                tau: th.tau,
                psi: th.psi,
                fitted_mean: s.residual.mean,
                fitted_std: s.residual.std(),
                unit_fitted_mean: s.unit.mean,
                unit_fitted_std: s.unit.std(),
                unit_theory_mean: th.unit_mean,
                unit_theory_std: th.unit_std,
                excess_mean: s.excess.mean,
                excess_std_error: s.excess.std_error(),
            }
        })
        .collect();
    let max_abs = agg.max_abs_residual();
    HedgeSummary {
        model: model.to_string(),
        n_paths: sim.n_paths,
        n_steps: agg.steps.len(),
        seed: sim.seed,
        horizon,
        premium,
        max_abs_residual: max_abs,
        max_abs_residual_over_premium: if premium > 0.0 { max_abs / premium } else { f64::NAN },
        terminal_hedge_error: ErrorStats {
            mean: agg.terminal_error.mean,
            std: agg.terminal_error.std(),
            mean_abs: agg.terminal_abs.mean,
            rms: agg.terminal_rms(),
        },
        cumulative_unhedged_mean: agg.wealth.mean,
        cumulative_unhedged_std: agg.wealth.std(),
        steps,
        oracle_check: None,
    }
}

/// Result of a hedge simulation.
#[derive(Debug, Clone)]
pub struct HedgeRun {
    pub kind: LedgerKind,
    pub ledgers: Vec<HedgeLedger>,
    pub stats: Aggregate,
    pub summary: HedgeSummary,
}

impl HedgeRun {
    pub fn write_ledger_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_ledgers_csv(&self.ledgers, self.kind, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize) -> HedgeRecord {
        HedgeRecord {
            step,
            t: 0.5,
            tau: 0.5,
            spot: 100.0,
            delta: 0.5,
            option: 10.0,
            portfolio: 40.0,
            accrual: 0.0,
            residual: 0.25,
            extra: RecordExtra::Jump {
                spot2: 50.0,
                delta2: 0.1,
                jumps_count: 2,
            },
        }
    }

    #[test]
    fn csv_layouts() {
        let l = HedgeLedger {
            path: 3,
            records: vec![rec(0)],
            terminal_hedge_error: 0.0,
            cumulative_unhedged: 0.0,
        };
        let mut buf = Vec::new();
        write_ledgers_csv(std::slice::from_ref(&l), LedgerKind::Jump, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "path,step,t,tau,spot,delta,option,portfolio,residual,spot2,delta2,jumps_count\n\
             3,0,0.5,0.5,100,0.5,10,40,0.25,50,0.1,2\n"
        );
        let mut buf = Vec::new();
        write_ledgers_csv(&[l], LedgerKind::Single, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("40,0.25\n"));
    }
}
