//! Sequential vs parallel execution of the three data-parallel hot spots.
//! Run with `--no-default-features` to see the fallback (both arms then
//! run sequentially).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, SamplingMode};
use std::hint::black_box;

use mleq_core::equilibrium::{grid_search, GridSearchConfig};
use mleq_core::noise::{monte_carlo_mspe, NoisyObservationModel, PartitionChoice};
use mleq_core::partition::ml_optimal_partitions;
use mleq_core::{Execution, Penalty, Settings, StateSpace, Strategy};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn settings(execution: Execution) -> Settings {
    Settings {
        execution,
        ..Settings::default()
    }
}

fn bench_grid_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid_search n=2 G=10");
    group.sample_size(10).sampling_mode(SamplingMode::Flat);
    let states = StateSpace::from_f64(&[0.75, 0.9]).unwrap();
    let penalty = Penalty::new(0.15).unwrap();
    let config = GridSearchConfig::new(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| grid_search(black_box(&states), penalty, &config, &settings(exec)).unwrap())
        });
    }
    group.finish();
}

fn bench_ml_optimal(c: &mut Criterion) {
    // 2n = 10 contingencies: 115975 partitions per call.
    let mut group = c.benchmark_group("ml_optimal_partitions 2n=10");
    group.sample_size(10);
    let strategy = Strategy::from_pairs(&[(0.1, 0.7), (0.2, 0.9), (0.0, 0.4), (0.3, 0.8), (0.05, 0.95)]).unwrap();
    let penalty = Penalty::new(0.02).unwrap();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ml_optimal_partitions(black_box(&strategy), penalty, &settings(exec)).unwrap())
        });
    }
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_mspe 1e6");
    group.sample_size(10);
    let model = NoisyObservationModel::new(Strategy::from_pairs(&[(0.2, 0.8)]).unwrap(), 0.09).unwrap();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_mspe(black_box(&model), PartitionChoice::Coarse, 1_000_000, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_grid_search, bench_ml_optimal, bench_monte_carlo);
criterion_main!(benches);
