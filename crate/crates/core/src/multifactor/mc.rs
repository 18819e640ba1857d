use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cholesky3, FactorState, MultifactorModel, SvModel, VovModel};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, stream, Execution, Purpose};
use crate::payoff::Payoff;
use crate::stats::Moments;

/// Risk-neutral Monte-Carlo settings. Partials are central differences with
/// relative bumps, all revaluations sharing the same random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPricing {
    pub n_paths: usize,
    /// Time steps from the valuation time to maturity.
    pub n_steps: usize,
    pub seed: u64,
    pub spot_bump: f64,
    pub vol_bump: f64,
    pub vov_bump: f64,
    pub execution: Execution,
}

impl McPricing {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            spot_bump: 0.01,
            vol_bump: 0.01,
            vov_bump: 0.01,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        for (field, b) in [
            ("spot_bump", self.spot_bump),
            ("vol_bump", self.vol_bump),
            ("vov_bump", self.vov_bump),
        ] {
            if !(b != 0.0 && b.abs() < 1.0) {
                return Err(Error::param(
                    field,
                    format!("relative bump must be non-zero and below 1, got {b}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McPrice {
    pub value: f64,
    pub std_error: f64,
    pub d_spot: f64,
    pub d_vol: f64,
    pub d_vov: Option<f64>,
}

/// Revaluation slots: base, spot up/down, vol up/down, vov up/down.
const SLOTS: usize = 7;

pub fn mc_price_and_partials(
    model: &MultifactorModel,
    payoff: &Payoff,
    pricing: &McPricing,
    state: &FactorState,
    t: f64,
    horizon: f64,
) -> Result<McPrice> {
    model.validate()?;
    pricing.validate()?;
    if !(t >= 0.0 && t < horizon) {
        return Err(Error::Domain {
            what: "valuation time",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let chol = match model {
        MultifactorModel::Vov(m) => Some(cholesky3(&m.correlation())?),
        MultifactorModel::Sv(_) => None,
    };
    let discount = (-model.rate().integrate(t, horizon)).exp();
    let chunks = map_chunks(
        pricing.n_paths,
        pricing.execution,
        |range| -> Result<[Moments; SLOTS]> {
            let mut acc = [Moments::default(); SLOTS];
            for i in range {
                let mut rng = stream(pricing.seed, Purpose::MultifactorPricing, i as u64);
                let terminal = match model {
                    MultifactorModel::Sv(m) => sv_path(m, pricing, state, t, horizon, &mut rng)?,
                    MultifactorModel::Vov(m) => vov_path(
                        m,
                        chol.as_ref().expect("vov factor"),
                        pricing,
                        state,
                        t,
                        horizon,
                        &mut rng,
                    )?,
                };
                for (a, s) in acc.iter_mut().zip(terminal) {
                    a.push(discount * payoff.eval_checked(s)?);
                }
            }
            Ok(acc)
        },
    );
    let mut acc = [Moments::default(); SLOTS];
    for c in chunks {
        for (a, b) in acc.iter_mut().zip(c?.iter()) {
            a.merge(b);
        }
    }
    let diff = |up: usize, down: usize, bump: f64, x: f64| (acc[up].mean - acc[down].mean) / (2.0 * bump * x);
    Ok(McPrice {
        value: acc[0].mean,
        std_error: acc[0].std_error(),
        d_spot: diff(1, 2, pricing.spot_bump, state.spot),
        d_vol: diff(3, 4, pricing.vol_bump, state.vol),
        d_vov: matches!(model, MultifactorModel::Vov(_)).then(|| diff(5, 6, pricing.vov_bump, state.vov)),
    })
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Terminal spots for every revaluation slot along one path.
fn sv_path(
    m: &SvModel,
    p: &McPricing,
    st: &FactorState,
    t: f64,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<[f64; SLOTS]> {
    let n = p.n_steps;
    let dt = (horizon - t) / n as f64;
    let sq = dt.sqrt();
    let scale = [1.0, 1.0 + p.vol_bump, 1.0 - p.vol_bump];
    let rho_c = (1.0 - m.rho * m.rho).sqrt();
    let mut log_v = 0.0f64;
    let mut log_s = [0.0; 3];
    for j in 0..n {
        let s = t + j as f64 * dt;
        let (r, beta) = (m.rate.eval(s), m.vol_vol.eval(s));
        let (z1, z2) = (normal(rng), normal(rng));
        let zs = m.rho * z1 + rho_c * z2;
        let v = st.vol * log_v.exp();
        for (ls, k) in log_s.iter_mut().zip(scale) {
            let hv = m.h.eval(v * k)?;
            *ls += (r - 0.5 * hv * hv) * dt + hv * sq * zs;
        }
        log_v += (r - 0.5 * beta * beta) * dt + beta * sq * z1;
    }
    let base = st.spot * log_s[0].exp();
    Ok([
        base,
        base * (1.0 + p.spot_bump),
        base * (1.0 - p.spot_bump),
        st.spot * log_s[1].exp(),
        st.spot * log_s[2].exp(),
        base,
        base,
    ])
}

fn vov_path(
    m: &VovModel,
    chol: &[[f64; 3]; 3],
    p: &McPricing,
    st: &FactorState,
    t: f64,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<[f64; SLOTS]> {
    let n = p.n_steps;
    let dt = (horizon - t) / n as f64;
    let sq = dt.sqrt();
    let w_scale = [1.0, 1.0 + p.vov_bump, 1.0 - p.vov_bump];
    let v_scale = [1.0, 1.0 + p.vol_bump, 1.0 - p.vol_bump];
    let mut log_w = 0.0f64;
    // v paths driven by g(w) for base, w-up and w-down
    let mut log_v = [0.0f64; 3];
    // spot paths: base, v-up, v-down, w-up, w-down
    let mut log_s = [0.0; 5];
    for j in 0..n {
        let s = t + j as f64 * dt;
        let (r, delta) = (m.rate.eval(s), m.vov_vol.eval(s));
        let xi = [normal(rng), normal(rng), normal(rng)];
        let z: [f64; 3] = std::array::from_fn(|i| (0..=i).map(|k| chol[i][k] * xi[k]).sum());
        let w = st.vov * log_w.exp();
        let v: [f64; 3] = std::array::from_fn(|i| st.vol * log_v[i].exp());
        let spot_vol = [
            m.h.eval(v[0])?,
            m.h.eval(v[0] * v_scale[1])?,
            m.h.eval(v[0] * v_scale[2])?,
            m.h.eval(v[1])?,
            m.h.eval(v[2])?,
        ];
        for (ls, hv) in log_s.iter_mut().zip(spot_vol) {
            *ls += (r - 0.5 * hv * hv) * dt + hv * sq * z[0];
        }
        for (lv, k) in log_v.iter_mut().zip(w_scale) {
            let gw = m.g.eval(w * k)?;
            *lv += (r - 0.5 * gw * gw) * dt + gw * sq * z[1];
        }
        log_w += (r - 0.5 * delta * delta) * dt + delta * sq * z[2];
    }
    let base = st.spot * log_s[0].exp();
    Ok([
        base,
        base * (1.0 + p.spot_bump),
        base * (1.0 - p.spot_bump),
        st.spot * log_s[1].exp(),
        st.spot * log_s[2].exp(),
        st.spot * log_s[3].exp(),
        st.spot * log_s[4].exp(),
    ])
}

#[cfg(test)]
mod tests {
    use super::super::StateFn;
    use super::*;
    use crate::diffusion::{bs_price, OptionKind};
    use crate::market::ParamSchedule as P;

    fn degenerate() -> SvModel {
        SvModel {
            drift: P::constant(0.1),
            vol_drift: P::constant(0.05),
            vol_vol: P::constant(0.0),
            rate: P::constant(0.01),
            rho: 0.3,
            h: StateFn::Sqrt,
            spot: 100.0,
            vol_state: 0.04,
        }
    }

    #[test]
    fn frozen_volatility_matches_black_scholes() {
        let m = degenerate();
        let pricing = McPricing::new(40_000, 50, 11);
        let call = Payoff::call(100.0).unwrap();
        let p = mc_price_and_partials(
            &MultifactorModel::Sv(m.clone()),
            &call,
            &pricing,
            &m.initial_state(),
            0.0,
            1.0,
        )
        .unwrap();
        // Under the pricing measure v grows at the riskless rate; left-point variance sum.
        let dt = 1.0 / 50.0;
        let var: f64 = (0..50).map(|j| 0.04 * (0.01 * j as f64 * dt).exp() * dt).sum();
        let bs = bs_price(100.0, 100.0, var.sqrt(), 0.01, 1.0, OptionKind::Call).unwrap();
        assert!(
            (p.value - bs.value).abs() < 3.0 * p.std_error,
            "{} vs {} (se {})",
            p.value,
            bs.value,
            p.std_error
        );
        assert!((p.d_spot - bs.delta).abs() < 0.02);
    }

    #[test]
    fn constant_payoff_is_discounted_and_flat() {
        let m = degenerate();
        let mut m2 = m.clone();
        m2.vol_vol = P::constant(0.3);
        let pricing = McPricing::new(500, 10, 1);
        let c = Payoff::constant(5.0).unwrap();
        let p = mc_price_and_partials(&MultifactorModel::Sv(m2), &c, &pricing, &m.initial_state(), 0.25, 1.0).unwrap();
        assert!((p.value - 5.0 * (-0.01f64 * 0.75).exp()).abs() < 1e-12);
        assert_eq!((p.d_spot, p.d_vol), (0.0, 0.0));
    }

    #[test]
    fn bump_sign_flip_is_exact() {
        let mut m = degenerate();
        m.vol_vol = P::constant(0.4);
        let model = MultifactorModel::Sv(m.clone());
        let call = Payoff::call(95.0).unwrap();
        let mut pricing = McPricing::new(2000, 20, 5);
        let a = mc_price_and_partials(&model, &call, &pricing, &m.initial_state(), 0.0, 0.5).unwrap();
        pricing.spot_bump = -pricing.spot_bump;
        pricing.vol_bump = -pricing.vol_bump;
        let b = mc_price_and_partials(&model, &call, &pricing, &m.initial_state(), 0.0, 0.5).unwrap();
        assert!((a.d_spot - b.d_spot).abs() <= 1e-12 * a.d_spot.abs());
        assert!((a.d_vol - b.d_vol).abs() <= 1e-12 * a.d_vol.abs().max(1.0));
    }
}
