use serde::Serialize;

use super::{bs_price, DiffusionModel, OptionKind};
use crate::error::{Error, Result};
use crate::payoff::Payoff;

/// Value and partials of a pricing surface at one `(spot, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Spatial nodes on `[0, x_max]` and the number of implicit time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    nodes: Vec<f64>,
    n_time: usize,
}

impl PdeGrid {
    pub fn uniform(x_max: f64, n_space: usize, n_time: usize) -> Result<Self> {
        if n_space < 3 {
            return Err(Error::Grid("need at least 3 space intervals".into()));
        }
        let dx = x_max / n_space as f64;
        Self::from_nodes((0..=n_space).map(|i| i as f64 * dx).collect(), n_time)
    }

    pub fn from_nodes(nodes: Vec<f64>, n_time: usize) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::Grid("need at least 4 space nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Grid("space grid must start at 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("space nodes must be strictly increasing".into()));
        }
        if n_time == 0 {
            return Err(Error::Grid("need at least one time step".into()));
        }
        Ok(Self { nodes, n_time })
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().expect("non-empty grid")
    }
}

#[derive(Debug, Clone)]
pub enum PricingSurface {
    ClosedForm {
        model: DiffusionModel,
        kind: OptionKind,
        strike: f64,
        horizon: f64,
    },
    Grid(GridSurface),
}

#[derive(Debug, Clone)]
pub struct GridSurface {
    nodes: Vec<f64>,
    dt: f64,
    /// `slices[m]` holds values at `t = m dt`, with derivatives at every node.
    slices: Vec<Slice>,
}

#[derive(Debug, Clone)]
struct Slice {
    v: Vec<f64>,
    vx: Vec<f64>,
    vxx: Vec<f64>,
}

impl PricingSurface {
    /// Black-Scholes surface; time-varying rate and volatility enter through their integrals.
    pub fn closed_form(model: &DiffusionModel, payoff: &Payoff, horizon: f64) -> Result<Self> {
        let (kind, strike) = match *payoff {
            Payoff::Call { strike } => (OptionKind::Call, strike),
            Payoff::Put { strike } => (OptionKind::Put, strike),
            _ => return Err(Error::InvalidPayoff("closed form needs a call or put".into())),
        };
        Ok(PricingSurface::ClosedForm {
            model: model.clone(),
            kind,
            strike,
            horizon,
        })
    }

    pub fn method(&self) -> &'static str {
        match self {
            PricingSurface::ClosedForm { .. } => "closed_form",
            PricingSurface::Grid(_) => "grid",
        }
    }

    pub fn eval(&self, spot: f64, t: f64) -> Result<SurfacePoint> {
        match self {
            PricingSurface::ClosedForm {
                model,
                kind,
                strike,
                horizon,
            } => {
                let t = t.min(*horizon);
                let tau = horizon - t;
                let (rate, vol) = if tau > 0.0 {
                    (
                        model.rate.integrate(t, *horizon) / tau,
                        (model.integrated_variance(t, *horizon) / tau).sqrt(),
                    )
                } else {
                    (model.rate.eval(t), model.volatility.eval(t))
                };
                let g = bs_price(spot, *strike, vol, rate, tau, *kind)?;
                let (r, s) = (model.rate.eval(t), model.volatility.eval(t));
                let theta = if tau > 0.0 {
                    r * g.value - r * spot * g.delta - 0.5 * s * s * spot * spot * g.gamma
                } else {
                    0.0
                };
                Ok(SurfacePoint {
                    value: g.value,
                    delta: g.delta,
                    gamma: g.gamma,
                    theta,
                })
            }
            PricingSurface::Grid(g) => Ok(g.eval(spot, t)),
        }
    }
}

/// Fully implicit finite-difference solution of the pricing equation
/// `V_t + r x V_x + sigma^2 x^2 V_xx / 2 - r V = 0`, `V(x, T) = G(x)`.
///
/// Both boundaries carry the discounted forward payoff `e^{-I} G(x e^{I})`,
/// `I = int_t^T r`, which is exact at `x = 0` and the far-field asymptote
/// for payoffs of at most linear growth.
pub fn pde_price_grid(model: &DiffusionModel, payoff: &Payoff, horizon: f64, grid: &PdeGrid) -> Result<PricingSurface> {
    model.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    if grid.x_max() < 5.0 * model.spot {
        return Err(Error::Grid(format!(
            "x_max = {} must be at least 5 x spot = {}",
            grid.x_max(),
            5.0 * model.spot
        )));
    }
    let x = &grid.nodes;
    let m = x.len() - 1;
    let n = grid.n_time;
    let dt = horizon / n as f64;

    let boundary = |t: f64, xb: f64| -> Result<f64> {
        let growth = model.rate.integrate(t, horizon);
        Ok((-growth).exp() * payoff.eval_checked(xb * growth.exp())?)
    };

    let terminal: Vec<f64> = x.iter().map(|&xi| payoff.eval_checked(xi)).collect::<Result<_>>()?;
    let mut values = vec![Vec::new(); n + 1];
    values[n] = terminal;

    let mut lower = vec![0.0; m - 1];
    let mut diag = vec![0.0; m - 1];
    let mut upper = vec![0.0; m - 1];
    let mut rhs = vec![0.0; m - 1];
    for step in (0..n).rev() {
        let t = step as f64 * dt;
        let r = model.rate.eval(t);
        let s = model.volatility.eval(t);
        let next = &values[step + 1];
        let v0 = boundary(t, 0.0)?;
        let vm = boundary(t, x[m])?;
        for i in 1..m {
            let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let a = 0.5 * s * s * x[i] * x[i];
            let b = r * x[i];
            let lo = a * 2.0 / (hm * (hm + hp)) - b * hp / (hm * (hm + hp));
            let mid = -a * 2.0 / (hm * hp) + b * (hp - hm) / (hm * hp) - r;
            let up = a * 2.0 / (hp * (hm + hp)) + b * hm / (hp * (hm + hp));
            lower[i - 1] = -dt * lo;
            diag[i - 1] = 1.0 - dt * mid;
            upper[i - 1] = -dt * up;
            rhs[i - 1] = next[i];
        }
        rhs[0] -= lower[0] * v0;
        rhs[m - 2] -= upper[m - 2] * vm;
        let interior = thomas(&lower, &diag, &upper, &rhs);
        let mut v = Vec::with_capacity(m + 1);
        v.push(v0);
        v.extend(interior);
        v.push(vm);
        values[step] = v;
    }

    let slices = values.into_iter().map(|v| derivatives(x, v)).collect();
    Ok(PricingSurface::Grid(GridSurface {
        nodes: x.clone(),
        dt,
        slices,
    }))
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

fn derivatives(x: &[f64], v: Vec<f64>) -> Slice {
    let m = x.len() - 1;
    let mut vx = vec![0.0; m + 1];
    let mut vxx = vec![0.0; m + 1];
    for i in 1..m {
        let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        vx[i] = (-hp * v[i - 1] / (hm * (hm + hp))) + (hp - hm) * v[i] / (hm * hp) + hm * v[i + 1] / (hp * (hm + hp));
        vxx[i] = 2.0 * (v[i - 1] / (hm * (hm + hp)) - v[i] / (hm * hp) + v[i + 1] / (hp * (hm + hp)));
    }
    vx[0] = (v[1] - v[0]) / (x[1] - x[0]);
    vx[m] = (v[m] - v[m - 1]) / (x[m] - x[m - 1]);
    vxx[0] = vxx[1];
    vxx[m] = vxx[m - 1];
    Slice { v, vx, vxx }
}

impl GridSurface {
    fn at_slice(&self, m: usize, spot: f64) -> (f64, f64, f64) {
        let x = &self.nodes;
        let s = &self.slices[m];
        let last = x.len() - 1;
        if spot >= x[last] {
            return (s.v[last] + s.vx[last] * (spot - x[last]), s.vx[last], 0.0);
        }
        let spot = spot.max(0.0);
        let i = (x.partition_point(|&xi| xi <= spot) - 1).min(last - 1);
        let h = x[i + 1] - x[i];
        let u = (spot - x[i]) / h;
        // Cubic Hermite on node values and node slopes.
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        let value = h00 * s.v[i] + h10 * h * s.vx[i] + h01 * s.v[i + 1] + h11 * h * s.vx[i + 1];
        let delta = (1.0 - u) * s.vx[i] + u * s.vx[i + 1];
        let gamma = (1.0 - u) * s.vxx[i] + u * s.vxx[i + 1];
        (value, delta, gamma)
    }

    fn eval(&self, spot: f64, t: f64) -> SurfacePoint {
        let n = self.slices.len() - 1;
        let pos = (t / self.dt).clamp(0.0, n as f64);
        let m = (pos.floor() as usize).min(n.saturating_sub(1));
        let w = pos - m as f64;
        let (v0, d0, g0) = self.at_slice(m, spot);
        let (v1, d1, g1) = self.at_slice(m + 1, spot);
        SurfacePoint {
            value: (1.0 - w) * v0 + w * v1,
            delta: (1.0 - w) * d0 + w * d1,
            gamma: (1.0 - w) * g0 + w * g1,
            theta: (v1 - v0) / self.dt,
        }
    }

    /// Node values of the slice at `t = m dt`.
    pub fn slice_values(&self, m: usize) -> &[f64] {
        &self.slices[m].v
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DiffusionModel {
        DiffusionModel::constant(0.08, 0.2, 0.01, 100.0).unwrap()
    }

    #[test]
    fn grid_matches_closed_form() {
        let grid = PdeGrid::uniform(500.0, 400, 400).unwrap();
        let call = Payoff::call(100.0).unwrap();
        let s = pde_price_grid(&model(), &call, 1.0, &grid).unwrap();
        let v = s.eval(100.0, 0.0).unwrap().value;
        let cf = bs_price(100.0, 100.0, 0.2, 0.01, 1.0, OptionKind::Call).unwrap().value;
        assert!((v / cf - 1.0).abs() < 1e-3, "{v} vs {cf}");
        let PricingSurface::Grid(g) = &s else {
            panic!("grid surface")
        };
        for (xi, vi) in g.nodes().iter().zip(g.slice_values(400)) {
            assert_eq!(*vi, (xi - 100.0f64).max(0.0));
        }
    }

    #[test]
    fn zero_payoff_gives_zero_surface() {
        let grid = PdeGrid::uniform(500.0, 50, 20).unwrap();
        let s = pde_price_grid(&model(), &Payoff::constant(0.0).unwrap(), 1.0, &grid).unwrap();
        for x in [0.0, 37.0, 100.0, 499.0] {
            let p = s.eval(x, 0.3).unwrap();
            assert_eq!((p.value, p.delta), (0.0, 0.0));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PdeGrid::from_nodes(vec![0.0, 2.0, 1.0, 3.0, 4.0], 10).is_err());
        let small = PdeGrid::uniform(300.0, 100, 10).unwrap();
        assert!(pde_price_grid(&model(), &Payoff::call(100.0).unwrap(), 1.0, &small).is_err());
    }

    #[test]
    fn time_varying_closed_form_uses_integrals() {
        let m = DiffusionModel::new(
            crate::ParamSchedule::constant(0.1),
            crate::ParamSchedule::new(vec![(0.0, 0.3), (0.5, 0.1)]).unwrap(),
            crate::ParamSchedule::constant(0.02),
            100.0,
        )
        .unwrap();
        let cf = PricingSurface::closed_form(&m, &Payoff::call(100.0).unwrap(), 1.0).unwrap();
        let grid = PdeGrid::uniform(600.0, 600, 800).unwrap();
        let pde = pde_price_grid(&m, &Payoff::call(100.0).unwrap(), 1.0, &grid).unwrap();
        let (a, b) = (cf.eval(100.0, 0.0).unwrap(), pde.eval(100.0, 0.0).unwrap());
        assert!((a.value / b.value - 1.0).abs() < 2e-3, "{} vs {}", a.value, b.value);
        assert!((a.delta - b.delta).abs() < 2e-3);
    }
}
