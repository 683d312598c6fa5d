use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use maxstable::families::cramer::LatticeLaw;
use maxstable::families::{asymptotic_entropy, counterexample_naturals, Extension, HorizonGrid};
use maxstable::{BoundedFunction, ConcentrationTable, FiniteMetricSpace, Mode, RSchedule, RiskMeasure};

const MODES: [(&str, Mode); 2] = [("auto", Mode::Auto), ("sequential", Mode::Sequential)];

fn concentration_table(c: &mut Criterion) {
    let k = 12;
    let gamma: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37) % 3.0).collect();
    let phi = RiskMeasure::atomic_finite(Arc::new(FiniteMetricSpace::discrete(k).unwrap()), &gamma).unwrap();
    let mut group = c.benchmark_group("concentration_table_k12");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| ConcentrationTable::build(&phi, &RSchedule::default(), mode).unwrap())
        });
    }
    group.finish();
}

fn horizon_sweep(c: &mut Criterion) {
    let fam = counterexample_naturals(256);
    let f = BoundedFunction::new((0..256).map(|i| (i as f64 * 0.1).sin()).collect()).unwrap();
    let grid = HorizonGrid::default();
    let mut group = c.benchmark_group("asymptotic_entropy_naturals256");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| asymptotic_entropy(&fam, &f, Extension::LastPoint, &grid, mode).unwrap())
        });
    }
    group.finish();
}

fn sample_mean_laws(c: &mut Criterion) {
    let law = LatticeLaw::bernoulli(0.5).unwrap();
    let horizons: Vec<u32> = (6..=12).map(|e| 1 << e).collect();
    let mut group = c.benchmark_group("binomial_laws");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| law.sample_mean_laws(&horizons, mode))
        });
    }
    group.finish();
}

criterion_group!(benches, concentration_table, horizon_sweep, sample_mean_laws);
criterion_main!(benches);
