use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use stochbt::balancing::{balance_system, PipelineOptions};
use stochbt::gramians::{type1_gramians, GramianKind};
use stochbt::hinf::hinf_norm;
use stochbt::lyapunov::{Direction, GenLyapOperator};
use stochbt::sim::{simulate_pair, InputSpec, SimConfig};
use stochbt::SymMatrix;
use stochbt_bench::{heat, ladder, LADDER_SIZES};

fn lyapunov(c: &mut Criterion) {
    let mut g = c.benchmark_group("lyapunov_solve");
    for n in LADDER_SIZES {
        let sys = ladder(n);
        let op = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Primal).unwrap();
        let rhs = SymMatrix::identity(n).scale(-1.0);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| op.solve(black_box(&rhs)).unwrap())
        });
    }
    g.finish();
}

fn gramians(c: &mut Criterion) {
    let mut g = c.benchmark_group("type1_gramians");
    for n in LADDER_SIZES {
        let sys = ladder(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| {
            b.iter(|| type1_gramians(black_box(s)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("type2_balance");
    g.sample_size(10);
    for n in [8, 12] {
        let sys = ladder(n);
        let opts = PipelineOptions::default();
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| {
            b.iter(|| balance_system(black_box(s), GramianKind::TypeII, &opts).unwrap())
        });
    }
    g.finish();
}

fn hinf(c: &mut Criterion) {
    let mut g = c.benchmark_group("hinf_norm");
    g.sample_size(10);
    for n in [8, 16] {
        let sys = ladder(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| {
            b.iter(|| hinf_norm(black_box(s), 1e-6).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let full = heat(6);
    let bal = balance_system(&full, GramianKind::TypeI, &PipelineOptions::default()).unwrap();
    let red = stochbt::balancing::truncate(&full, &bal.form, 4, GramianKind::TypeI)
        .unwrap()
        .reduced;
    let cfg = SimConfig {
        t_final: 1.0,
        dt: 1e-3,
        n_paths: 200,
        seed: 1,
        input: InputSpec::Constant(vec![1.0; 3]),
        record_stride: None,
    };
    let mut g = c.benchmark_group("simulate_pair");
    g.sample_size(10);
    g.bench_function("heat6_200paths", |b| {
        b.iter(|| simulate_pair(black_box(&full), &red, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, lyapunov, gramians, hinf, simulation);
criterion_main!(benches);
