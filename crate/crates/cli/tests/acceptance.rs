//! One PASS/FAIL line per acceptance criterion, at full scale.
//! Run with `cargo test -p mvhedge-cli --test acceptance -- --nocapture` to see the report.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use mvhedge::binomial::{
    build_lattice, delta_at_node, delta_drift_form, delta_one_step_increment, simulate_hedge, KsrfStepModel,
};
use mvhedge::calibration::{
    calibrate_gamma, calibration_lattice, estimate_ph, gamma_surface, CalibrationConfig, OptionSpec, PriceSeries,
    ResidualPanel, Target, SENTINEL,
};
use mvhedge::diffusion::{delta_optimal_diffusion, pde_price_grid, DiffusionModel, PdeGrid, PricingSurface};
use mvhedge::jumpdiff::{
    jump_utility, optimal_deltas_jump, reference_corrections, rn_step_variances, ClaimQuote, JumpModel, MonomialClaim,
};
use mvhedge::multifactor::{
    sv_holdings, sv_risk_premium, vov_determinants, vov_holdings, DcForm, StateFn, SvModel, VovModel,
};
use mvhedge::stats::ols_slope;
use mvhedge::{
    risk_aversion_from_psi, Execution, MarketParams, ParamSchedule as P, Payoff, RiskAversion, RiskAversionSchedule,
    SimulationConfig, TimeGrid,
};

const MU: f64 = 0.08;
const SIGMA: f64 = 0.2;
const RATE: f64 = 0.01;
const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn market() -> MarketParams {
    MarketParams::new(MU, SIGMA, RATE, 100.0).unwrap()
}

fn crr_lattice(n: usize, payoff: &Payoff) -> mvhedge::binomial::BinomialLattice {
    let grid = TimeGrid::new(n, 1.0).unwrap();
    let p = KsrfStepModel::crr_probability(&market(), grid.step());
    build_lattice(&market(), grid, p, payoff).unwrap()
}

fn synthetic_series() -> PriceSeries {
    PriceSeries::synthetic_gbm(
        100.0,
        MU,
        SIGMA,
        2521,
        SEED,
        NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(),
    )
    .unwrap()
}

fn lattice_pricing() -> Outcome {
    let call = Payoff::call(100.0).unwrap();
    let exact = common::bs_call(100.0, 100.0, SIGMA, RATE, 1.0);
    let e500 = (crr_lattice(500, &call).premium() - exact).abs();
    let e1000 = (crr_lattice(1000, &call).premium() - exact).abs();
    let rel = e1000 / exact;
    let ratio = e1000 / e500;
    outcome(
        rel < 5e-3 && (0.4..=0.6).contains(&ratio),
        format!("rel error {rel:.2e} at n=1000, error ratio {ratio:.3}"),
    )
}

fn delta_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let n = 160;
    let l = build_lattice(
        &market(),
        TimeGrid::new(n, 1.0).unwrap(),
        0.53,
        &Payoff::call(105.0).unwrap(),
    )
    .unwrap();
    let sched = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(0..n);
        let j = rng.random_range(0..=k);
        let s = l.price(k, j).unwrap();
        let target = delta_at_node(&l, k, j, &sched).unwrap();
        let risk = risk_aversion_from_psi(sched.psi(l.grid.tau(k)).unwrap(), s, MU, SIGMA).unwrap();
        let (fu, fd) = l.children(k, j).unwrap();
        for d in [
            delta_drift_form(&l, k, j, risk).unwrap(),
            delta_one_step_increment(s, &l.step_model, fu, fd, risk),
        ] {
            worst = worst.max((d - target).abs() / target.abs().max(1e-300));
        }
    }
    outcome(worst <= 1e-10, format!("max relative gap {worst:.2e} over 100 nodes"))
}

fn residual_law() -> Outcome {
    let n = 160;
    let l = crr_lattice(n, &Payoff::call(100.0).unwrap());
    let sched = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
    let run = simulate_hedge(&l, &sched, &SimulationConfig::new(100_000, SEED)).unwrap();
    let h = l.grid.step();
    let mut hits = 0;
    for (k, st) in run.stats.steps.iter().enumerate() {
        let psi = sched.psi(l.grid.tau(k)).unwrap();
        let (mean, std) = (psi * (MU - RATE) * h, psi * SIGMA * h.sqrt());
        let m = &st.unit;
        let paths = m.n as f64;
        let mean_ok = (m.mean - mean).abs() <= 3.0 * std / paths.sqrt();
        let std_ok = (m.std() - std).abs() <= 3.0 * std / (2.0 * paths).sqrt();
        hits += usize::from(mean_ok && std_ok);
    }
    let share = hits as f64 / n as f64;
    outcome(share >= 0.95, format!("{hits}/{n} steps within 3 standard errors"))
}

fn perfect_hedges() -> Outcome {
    let n = 160;
    let l = crr_lattice(n, &Payoff::call(100.0).unwrap());
    let tol = 1e-9 * l.premium();
    let zero = simulate_hedge(
        &l,
        &RiskAversionSchedule::zero(1.0).unwrap(),
        &SimulationConfig::new(10_000, SEED),
    )
    .unwrap();
    let zero_max = zero.stats.max_abs_residual();
    let h = l.grid.step();
    let mut delayed_max = 0.0f64;
    for a_steps in [2usize, 7, 20] {
        let a = a_steps as f64 * h;
        let run = simulate_hedge(
            &l,
            &RiskAversionSchedule::delayed(a, 1.0, 1.0).unwrap(),
            &SimulationConfig::new(10_000, SEED),
        )
        .unwrap();
        let last = (a / h).ceil() as usize;
        for st in &run.stats.steps[n - last..] {
            delayed_max = delayed_max.max(st.max_abs);
        }
    }
    let detail = format!(
        "zero-tilt max |U| {:.1e} x premium, delayed family tail max |U| {:.1e} x premium",
        zero_max / l.premium(),
        delayed_max / l.premium()
    );
    outcome(zero_max <= tol && delayed_max <= tol, detail)
}

fn terminal_convergence() -> Outcome {
    let call = Payoff::call(100.0).unwrap();
    let sched = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
    let rms = |n: usize| {
        simulate_hedge(&crr_lattice(n, &call), &sched, &SimulationConfig::new(10_000, SEED))
            .unwrap()
            .summary
            .terminal_hedge_error
            .rms
    };
    let (coarse, fine) = (rms(100), rms(400));
    outcome(
        fine <= 0.55 * coarse,
        format!(
            "rms {coarse:.4e} at n=100, {fine:.4e} at n=400, ratio {:.3}",
            fine / coarse
        ),
    )
}

fn diffusion_engine() -> Outcome {
    let model = DiffusionModel::constant(MU, SIGMA, RATE, 100.0).unwrap();
    let call = Payoff::call(100.0).unwrap();
    let pde = pde_price_grid(&model, &call, 1.0, &PdeGrid::uniform(500.0, 400, 400).unwrap()).unwrap();
    let exact = common::bs_call(100.0, 100.0, SIGMA, RATE, 1.0);
    let rel = (pde.eval(100.0, 0.0).unwrap().value - exact).abs() / exact;

    let surface = PricingSurface::closed_form(&model, &call, 1.0).unwrap();
    let gamma = 1.3;
    let sched = RiskAversionSchedule::exponential(gamma, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (t, s) = (rng.random_range(0.0..0.999), rng.random_range(30.0..300.0));
        let tilt = delta_optimal_diffusion(&surface, &sched, s, t).unwrap() - surface.eval(s, t).unwrap().delta;
        worst = worst.max((tilt - gamma * (1.0 - (-gamma * (1.0 - t)).exp())).abs());
    }
    outcome(
        rel <= 1e-3 && worst <= 1e-12,
        format!("PDE rel error {rel:.2e}, max |tilt - psi| {worst:.1e} over 1000 points"),
    )
}

fn vov(rho: (f64, f64, f64), drifts: (f64, f64, f64)) -> VovModel {
    VovModel {
        drift: P::constant(drifts.0),
        vol_drift: P::constant(drifts.1),
        vov_drift: P::constant(drifts.2),
        vov_vol: P::constant(0.3),
        rate: P::constant(RATE),
        rho_v: rho.0,
        rho_w: rho.1,
        rho_vw: rho.2,
        h: StateFn::Sqrt,
        g: StateFn::Power { exponent: 0.5 },
        spot: 100.0,
        vol_state: 0.04,
        vov_state: 0.09,
        dc_form: DcForm::Consistent,
    }
}

fn multifactor_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut cramer = 0.0f64;
    let mut accepted = 0;
    while accepted < 1000 {
        let rho: (f64, f64, f64) = (
            rng.random_range(-0.95..0.95),
            rng.random_range(-0.95..0.95),
            rng.random_range(-0.95..0.95),
        );
        if 1.0 + 2.0 * rho.0 * rho.1 * rho.2 - rho.0 * rho.0 - rho.1 * rho.1 - rho.2 * rho.2 <= 1e-3 {
            continue;
        }
        accepted += 1;
        let drifts = (
            rng.random_range(-0.2..0.3),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        let m = vov(rho, drifts);
        let det = vov_determinants(&m, &m.initial_state(), 0.0, RiskAversion::Finite(2.0)).unwrap();
        let corr = [[1.0, rho.0, rho.1], [rho.0, 1.0, rho.2], [rho.1, rho.2, 1.0]];
        let x = common::solve(corr, [drifts.0 / 0.2, drifts.1 / 0.3, drifts.2 / 0.3]);
        for (num, xi) in [det.d_a, det.d_b, det.d_c].iter().zip(x) {
            cramer = cramer.max((num / det.d - xi).abs() / xi.abs().max(1.0));
        }
    }

    let sv = SvModel {
        drift: P::constant(MU),
        vol_drift: P::constant(0.1),
        vol_vol: P::constant(0.4),
        rate: P::constant(RATE),
        rho: -0.5,
        h: StateFn::Sqrt,
        spot: 100.0,
        vol_state: 0.04,
    };
    let m3 = vov((-0.4, 0.2, 0.3), (MU, 0.05, -0.1));
    let (st2, st3) = (sv.initial_state(), m3.initial_state());
    let mut scaling = 0.0f64;
    for r in [0.1, 1.0, 7.0, 50.0] {
        let k = 4.0;
        let (a1, b1) = sv_holdings(&sv, (0.0, 0.0), &st2, RiskAversion::Finite(r), 0.0).unwrap();
        let (a2, b2) = sv_holdings(&sv, (0.0, 0.0), &st2, RiskAversion::Finite(k * r), 0.0).unwrap();
        let x1 = vov_holdings(&m3, (0.0, 0.0, 0.0), &st3, RiskAversion::Finite(r), 0.0).unwrap();
        let x2 = vov_holdings(&m3, (0.0, 0.0, 0.0), &st3, RiskAversion::Finite(k * r), 0.0).unwrap();
        let p1 = sv_risk_premium(&sv, &st2, RiskAversion::Finite(r), 0.0).unwrap();
        let p2 = sv_risk_premium(&sv, &st2, RiskAversion::Finite(k * r), 0.0).unwrap();
        for (u, v) in [(a1, a2), (b1, b2), (x1.0, x2.0), (x1.1, x2.1), (x1.2, x2.2), (p1, p2)] {
            scaling = scaling.max((u - k * v).abs() / u.abs());
        }
    }
    let limit = sv_risk_premium(&sv, &st2, RiskAversion::Infinite, 0.0).unwrap();
    let detail = format!(
        "Cramer max gap {cramer:.1e} over 1000 triples, 1/R scaling gap {scaling:.1e}, premium at R=inf {limit}"
    );
    outcome(cramer <= 1e-10 && scaling <= 1e-12 && limit == 0.0, detail)
}

fn brute_force_utility(m: &JumpModel, q: &ClaimQuote, s: [f64; 2], risk: RiskAversion, d: [f64; 2]) -> f64 {
    let p = m.params(0.0);
    let lam = p.intensity;
    let mm = [0, 1].map(|j| p.drift[j] + lam * p.jump[j]);
    let claim_drift = p.rate * q.value + q.d1 * s[0] * (mm[0] - p.rate) + q.d2 * s[1] * (mm[1] - p.rate);
    let mean = d[0] * s[0] * mm[0] + d[1] * s[1] * mm[1] - claim_drift;
    let brown = d[0] * s[0] * p.volatility[0] + d[1] * s[1] * p.volatility[1]
        - (q.d1 * s[0] * p.volatility[0] + q.d2 * s[1] * p.volatility[1]);
    let jump = d[0] * s[0] * p.jump[0] + d[1] * s[1] * p.jump[1] - (q.displaced - q.value);
    let c = risk.relative();
    (1.0 - c) * mean - c * (brown * brown + lam * jump * jump)
}

fn jump_engine() -> Outcome {
    let m = JumpModel::constant([0.09, 0.05], [0.25, 0.12], [-0.15, 0.08], 0.8, 0.02, [100.0, 80.0], 3.0);
    let claim = MonomialClaim::new(1.0, 1.6, 0.7, 1.0);
    let steps = [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0];
    let var = rn_step_variances(&m, &claim, m.spot, 0.0, &steps, 40_000, SEED, Execution::Parallel).unwrap();
    let slope = ols_slope(&steps.map(f64::ln), &var.iter().map(|v| v.ln()).collect::<Vec<_>>());

    let q = ClaimQuote {
        value: 12.0,
        d1: 0.55,
        d2: -0.2,
        displaced: 9.5,
    };
    let s = m.spot;
    let risk = RiskAversion::Finite(0.7);
    let opt = optimal_deltas_jump(&m, &q, s, risk, 0.0).unwrap();
    let eps = 1e-5;
    let grad = [0, 1].map(|j| {
        let (mut up, mut dn) = (opt.deltas, opt.deltas);
        up[j] += eps;
        dn[j] -= eps;
        (brute_force_utility(&m, &q, s, risk, up) - brute_force_utility(&m, &q, s, risk, dn)) / (2.0 * eps)
    });
    let grad_norm = grad[0].hypot(grad[1]);
    let utility_gap = (jump_utility(&m, &q, s, risk, 0.0, opt.deltas).unwrap()
        - brute_force_utility(&m, &q, s, risk, opt.deltas))
    .abs();
    let reference = reference_corrections(&m, s, risk, 0.0).unwrap();
    let ratio = [reference[0] / opt.correction[0], reference[1] / opt.correction[1]];
    let detail = format!(
        "variance slope {slope:.3}, gradient norm {grad_norm:.1e}, utility gap {utility_gap:.1e}; \
         reference corrections are {:.6}x / {:.6}x the utility maximiser",
        ratio[0], ratio[1]
    );
    outcome(
        (slope - 2.0).abs() <= 0.2 && grad_norm <= 1e-6 && utility_gap <= 1e-10,
        detail,
    )
}

fn calibration_recovery() -> Outcome {
    let series = synthetic_series();
    let est = estimate_ph(&series).unwrap();
    let option = OptionSpec {
        moneyness: 1.0,
        maturity_days: 160,
    };
    let lattice = calibration_lattice(&est, &option, 0.02).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, gamma) in [0.2, 0.5, 0.8, 2.0].into_iter().enumerate() {
        let start = Instant::now();
        let sched = RiskAversionSchedule::exponential(gamma, option.horizon()).unwrap();
        let run = simulate_hedge(&lattice, &sched, &SimulationConfig::new(100_000, 1000 + i as u64)).unwrap();
        let panel = ResidualPanel::from_run(&run);
        let res = calibrate_gamma(
            &series,
            &option,
            &Target::Panel(panel),
            &CalibrationConfig::new(0.02, 100_000, SEED),
        )
        .unwrap();
        let secs = start.elapsed().as_secs_f64();
        let ok = res.converged && (res.gamma - gamma).abs() <= 0.1 * gamma && secs < 300.0;
        pass &= ok;
        parts.push(format!("{gamma} -> {:.4} ({secs:.1}s)", res.gamma));
    }
    outcome(pass, parts.join(", "))
}

fn surface_shape() -> Outcome {
    let series = synthetic_series();
    let moneyness = [0.8, 0.9, 1.0, 1.1, 1.2];
    let maturities = [40, 80, 120, 160];
    let surf = gamma_surface(
        &series,
        &moneyness,
        &maturities,
        &CalibrationConfig::new(0.02, 20_000, SEED),
    )
    .unwrap();
    let low = &surf.grid.values[0];
    let low_ok = surf.failures.iter().all(|f| f.moneyness != 0.8) && low.iter().all(|&g| g != SENTINEL && g < 0.05);
    let row = |r: &Vec<f64>| r.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "moneyness 0.8 row [{}], failed cells {}, monotonicity violations {} (informational)",
        row(low),
        surf.failures.len(),
        surf.monotonicity_violations.len()
    );
    for (m, r) in moneyness.iter().zip(&surf.grid.values) {
        println!("    gamma at moneyness {m}: [{}]", row(r));
    }
    outcome(low_ok, detail)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let d = TempDir::new().unwrap();
    let prices = d.path().join("prices.csv");
    PriceSeries::synthetic_gbm(100.0, MU, SIGMA, 500, 8, NaiveDate::from_ymd_opt(2010, 1, 4).unwrap())
        .unwrap()
        .write_csv(fs::File::create(&prices).unwrap())
        .unwrap();
    let cfg = d.path().join("det.toml");
    fs::write(
        &cfg,
        "seed = 42\n[grid]\nn_steps = 20\n[mc]\nn_paths = 300\nn_steps = 10\n[simulation]\nn_paths = 1000\nkeep_ledgers = 20\n\
         [calibration]\nmaturity_days = 20\nn_paths = 4000\nsurface_moneyness = [0.9, 1.0, 1.1]\nsurface_maturity_days = [10, 20]\n",
    )
    .unwrap();
    let (cfg, prices) = (cfg.to_str().unwrap(), prices.to_str().unwrap());
    let commands: Vec<Vec<&str>> = vec![
        vec!["price"],
        vec!["price", "--model", "diffusion"],
        vec!["price", "--model", "sv"],
        vec!["price", "--model", "vov"],
        vec!["price", "--model", "jump"],
        vec!["hedge"],
        vec!["hedge", "--model", "diffusion"],
        vec!["hedge", "--model", "sv"],
        vec!["hedge", "--model", "vov"],
        vec!["hedge", "--model", "jump"],
        vec!["calibrate", "--prices", prices],
        vec!["surface"],
    ];
    let mut mismatched = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let mut snaps = Vec::new();
        for (j, threads) in [1usize, 1, 2, 8].into_iter().enumerate() {
            let out = format!("run{i}_{j}");
            let status = Command::new(env!("CARGO_BIN_EXE_mvhedge"))
                .args(args)
                .args(["--config", cfg, "--out", &out])
                .current_dir(d.path())
                .env("RAYON_NUM_THREADS", threads.to_string())
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{args:?} failed");
            snaps.push(snapshot(&d.path().join(&out)));
        }
        if snaps.iter().any(|s| *s != snaps[0]) {
            mismatched.push(args.join(" "));
        }
    }
    let detail = format!(
        "{} commands x 4 runs (1, 1, 2, 8 workers), mismatches: {mismatched:?}",
        commands.len()
    );
    outcome(mismatched.is_empty(), detail)
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, f64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("lattice price converges to the closed form", 5.0, lattice_pricing),
        ("drift, increment and tilt delta forms agree", 1.0, delta_forms),
        ("per-step residual law", 60.0, residual_law),
        ("perfect-hedge limits", f64::INFINITY, perfect_hedges),
        (
            "terminal hedge error is first order",
            f64::INFINITY,
            terminal_convergence,
        ),
        ("diffusion PDE and tilt", f64::INFINITY, diffusion_engine),
        (
            "multifactor determinants and 1/R scaling",
            f64::INFINITY,
            multifactor_algebra,
        ),
        (
            "jump engine risk elimination and utility optimum",
            f64::INFINITY,
            jump_engine,
        ),
        ("embedded intensity recovery", 4.0 * 300.0, calibration_recovery),
        ("synthetic surface shape", f64::INFINITY, surface_shape),
        (
            "byte-identical outputs across runs and workers",
            f64::INFINITY,
            determinism,
        ),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs < *budget;
        let budget = if budget.is_finite() {
            format!(", budget {budget}s")
        } else {
            String::new()
        };
        println!(
            "criterion {:>2} {}: {name}: {} [{secs:.2}s{budget}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
