mod common;

use proptest::prelude::*;

use mvhedge::diffusion::{
    delta_optimal_diffusion, pde_price_grid, simulate_hedge_diffusion, DiffusionModel, PdeGrid, PricingSurface,
};
use mvhedge::{Payoff, RiskAversionSchedule, SimulationConfig, TimeGrid};

#[test]
fn pde_grid_matches_closed_form() {
    let model = DiffusionModel::constant(0.08, 0.2, 0.01, 100.0).unwrap();
    let payoff = Payoff::call(100.0).unwrap();
    let surface = pde_price_grid(&model, &payoff, 1.0, &PdeGrid::uniform(500.0, 400, 400).unwrap()).unwrap();
    let exact = common::bs_call(100.0, 100.0, 0.2, 0.01, 1.0);
    let v = surface.eval(100.0, 0.0).unwrap().value;
    assert!(((v - exact) / exact).abs() < 1e-3, "{v} vs {exact}");
    for s in [80.0, 120.0] {
        let p = surface.eval(s, 0.5).unwrap();
        assert!((p.value - common::bs_call(s, 100.0, 0.2, 0.01, 0.5)).abs() < 2e-2);
        assert!((p.delta - common::bs_call_delta(s, 100.0, 0.2, 0.01, 0.5)).abs() < 2e-3);
    }
}

#[test]
fn terminal_error_shrinks_with_the_step() {
    let model = DiffusionModel::constant(0.08, 0.2, 0.01, 100.0).unwrap();
    let payoff = Payoff::call(85.0).unwrap();
    let surface = PricingSurface::closed_form(&model, &payoff, 1.0).unwrap();
    let sched = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
    let rms = |n: usize| {
        let run = simulate_hedge_diffusion(
            &model,
            &surface,
            &payoff,
            &sched,
            TimeGrid::new(n, 1.0).unwrap(),
            &SimulationConfig::new(4000, 2),
        )
        .unwrap();
        run.summary.terminal_hedge_error.rms
    };
    let (coarse, fine) = (rms(50), rms(200));
    assert!(fine <= 0.55 * coarse, "{coarse} -> {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tilt_is_exactly_psi(
        gamma in 0.0f64..4.0,
        t in 0.0f64..0.99,
        spot in 40.0f64..250.0,
        vol in 0.05f64..0.8,
        strike in 50.0f64..150.0,
    ) {
        let model = DiffusionModel::constant(0.08, vol, 0.01, 100.0).unwrap();
        let surface = PricingSurface::closed_form(&model, &Payoff::put(strike).unwrap(), 1.0).unwrap();
        let sched = RiskAversionSchedule::exponential(gamma, 1.0).unwrap();
        let d = delta_optimal_diffusion(&surface, &sched, spot, t).unwrap();
        let rn = surface.eval(spot, t).unwrap().delta;
        let psi = gamma * (1.0 - (-gamma * (1.0 - t)).exp());
        prop_assert!((d - rn - psi).abs() <= 1e-12 * psi.max(1.0));
    }
}
