//! Parallel against sequential execution for the path-heavy engines.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mvhedge::binomial::{build_lattice, simulate_hedge, KsrfStepModel};
use mvhedge::jumpdiff::{jump_price, JumpModel, JumpPayoff, JumpPricing};
use mvhedge::{Execution, MarketParams, Payoff, RiskAversionSchedule, SimulationConfig, TimeGrid};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn binomial_hedge(c: &mut Criterion) {
    let market = MarketParams::new(0.08, 0.2, 0.01, 100.0).unwrap();
    let grid = TimeGrid::new(160, 1.0).unwrap();
    let p = KsrfStepModel::crr_probability(&market, grid.step());
    let lattice = build_lattice(&market, grid, p, &Payoff::call(100.0).unwrap()).unwrap();
    let sched = RiskAversionSchedule::exponential(1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("binomial_hedge_20k_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        let sim = SimulationConfig::new(20_000, 1).keep(0).with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                black_box(
                    simulate_hedge(&lattice, &sched, &sim)
                        .unwrap()
                        .summary
                        .terminal_hedge_error
                        .rms,
                )
            })
        });
    }
    group.finish();
}

fn jump_pricing(c: &mut Criterion) {
    let model = JumpModel::constant([0.09, 0.05], [0.25, 0.12], [-0.15, 0.08], 0.8, 0.02, [100.0, 80.0], 3.0);
    let mut group = c.benchmark_group("jump_price_20k_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        let pricing = JumpPricing {
            execution: exec,
            ..JumpPricing::new(20_000, 50, 1)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                black_box(
                    jump_price(&model, &JumpPayoff::Exchange, &pricing, model.spot, 0.0, 1.0)
                        .unwrap()
                        .quote
                        .value,
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, binomial_hedge, jump_pricing);
criterion_main!(benches);
