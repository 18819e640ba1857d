//! Mean-variance optimal hedging of European claims with a risk-aversion
//! schedule that decays to minimum-variance hedging at maturity.
//!
//! The hedge holds the risk-neutral delta plus a deterministic tilt `psi(tau)`;
//! engines cover a binomial lattice, a diffusion, stochastic volatility (with
//! and without a vol-of-vol factor) and a two-asset jump diffusion.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod binomial;
pub mod calibration;
pub mod diffusion;
pub mod error;
pub mod exec;
pub mod grid;
pub mod jumpdiff;
pub mod ledger;
pub mod market;
pub mod multifactor;
pub mod payoff;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::TimeGrid;
pub use ledger::{HedgeLedger, HedgeRun, HedgeSummary, SimulationConfig};
pub use market::{MarketParams, ParamSchedule};
pub use payoff::Payoff;
pub use schedule::{risk_aversion_from_psi, PsiFamily, RiskAversion, RiskAversionSchedule};
