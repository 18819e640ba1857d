use proptest::prelude::*;

use mvhedge::jumpdiff::{
    jump_utility, optimal_deltas_jump, reference_corrections, rn_step_variances, ClaimQuote, JumpModel, MonomialClaim,
};
use mvhedge::stats::ols_slope;
use mvhedge::{Execution, RiskAversion};

fn model() -> JumpModel {
    JumpModel::constant([0.09, 0.05], [0.25, 0.12], [-0.15, 0.08], 0.8, 0.02, [100.0, 80.0], 3.0)
}

/// Utility rate of `d` built directly from the Brownian and Poisson coefficients of
/// `dP = d1 dS1 + d2 dS2 - dV`, with the claim drift fixed by the pricing equation.
fn brute_force_utility(m: &JumpModel, q: &ClaimQuote, s: [f64; 2], risk: RiskAversion, d: [f64; 2]) -> f64 {
    let p = m.params(0.0);
    let lam = p.intensity;
    let mm = [0, 1].map(|j| p.drift[j] + lam * p.jump[j]);
    let b_v = q.d1 * s[0] * p.volatility[0] + q.d2 * s[1] * p.volatility[1];
    let jump_v = q.displaced - q.value;
    let claim_drift = p.rate * q.value + (0..2).map(|j| [q.d1, q.d2][j] * s[j] * (mm[j] - p.rate)).sum::<f64>();
    let mean = d[0] * s[0] * mm[0] + d[1] * s[1] * mm[1] - claim_drift;
    let brown = d[0] * s[0] * p.volatility[0] + d[1] * s[1] * p.volatility[1] - b_v;
    let jump = d[0] * s[0] * p.jump[0] + d[1] * s[1] * p.jump[1] - jump_v;
    let var = brown * brown + lam * jump * jump;
    let c = risk.relative();
    (1.0 - c) * mean - c * var
}

fn quote() -> ClaimQuote {
    ClaimQuote {
        value: 12.0,
        d1: 0.55,
        d2: -0.2,
        displaced: 9.5,
    }
}

#[test]
fn utility_matches_coefficient_route() {
    let (m, q, s) = (model(), quote(), [100.0, 80.0]);
    let risk = RiskAversion::Finite(0.7);
    for d in [[0.0, 0.0], [0.5, -0.3], [1.2, 0.4], [-0.6, 2.0]] {
        let a = jump_utility(&m, &q, s, risk, 0.0, d).unwrap();
        let b = brute_force_utility(&m, &q, s, risk, d);
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn optimal_deltas_zero_the_utility_gradient() {
    let (m, q, s) = (model(), quote(), [100.0, 80.0]);
    for r in [0.05, 0.7, 12.0] {
        let risk = RiskAversion::Finite(r);
        let opt = optimal_deltas_jump(&m, &q, s, risk, 0.0).unwrap();
        let eps = 1e-5;
        let grad: Vec<f64> = (0..2)
            .map(|j| {
                let mut up = opt.deltas;
                let mut dn = opt.deltas;
                up[j] += eps;
                dn[j] -= eps;
                (brute_force_utility(&m, &q, s, risk, up) - brute_force_utility(&m, &q, s, risk, dn)) / (2.0 * eps)
            })
            .collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-6, "R = {r}: gradient {grad:?}");

        // the reference corrections sit at twice the maximiser and lose utility
        let reference = reference_corrections(&m, s, risk, 0.0).unwrap();
        for (p, c) in reference.iter().zip(opt.correction) {
            assert!((p / c - 2.0).abs() < 1e-10);
        }
        let at_reference = [opt.rn[0] + reference[0], opt.rn[1] + reference[1]];
        assert!(brute_force_utility(&m, &q, s, risk, at_reference) < brute_force_utility(&m, &q, s, risk, opt.deltas));
    }
}

#[test]
fn risk_neutral_increment_variance_is_second_order() {
    let m = model();
    let claim = MonomialClaim::new(1.0, 1.6, 0.7, 1.0);
    let steps = [1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0];
    let var = rn_step_variances(&m, &claim, m.spot, 0.0, &steps, 40_000, 17, Execution::Parallel).unwrap();
    let x: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = var.iter().map(|v| v.ln()).collect();
    let slope = ols_slope(&x, &y);
    assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn corrections_scale_with_inverse_risk_aversion(r in 0.01f64..100.0, k in 1.5f64..20.0, lam in 0.1f64..3.0, g1 in -0.4f64..-0.01) {
        let m = JumpModel::constant([0.09, 0.05], [0.25, 0.12], [g1, 0.08], lam, 0.02, [100.0, 80.0], 3.0);
        let q = quote();
        let a = optimal_deltas_jump(&m, &q, m.spot, RiskAversion::Finite(r), 0.0).unwrap();
        let b = optimal_deltas_jump(&m, &q, m.spot, RiskAversion::Finite(k * r), 0.0).unwrap();
        for j in 0..2 {
            prop_assert!((a.correction[j] - k * b.correction[j]).abs() <= 1e-12 * a.correction[j].abs().max(1e-300));
        }
        let inf = optimal_deltas_jump(&m, &q, m.spot, RiskAversion::Infinite, 0.0).unwrap();
        prop_assert_eq!(inf.deltas, inf.rn);
    }
}
