use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpg_bench::{c1_fixture, congestion_fixture};
use mpg_core::game::state_values;
use mpg_core::geometry::project_simplex;
use mpg_core::gradient::{exact_gradient_all, reinforce_estimate, HorizonMode};
use mpg_core::{JointPolicy, MarkovGame};

fn simplex(c: &mut Criterion) {
    let mut group = c.benchmark_group("project_simplex");
    for n in [4usize, 64, 1024] {
        let v: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 / 3.0 - 1.5).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| b.iter(|| project_simplex(black_box(v))));
    }
    group.finish();
}

fn exact_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    for (counts, states) in [(vec![2, 2], 2usize), (vec![3, 3, 3], 6), (vec![4, 4, 4, 4], 8)] {
        let (game, policy) = c1_fixture(&counts, states, 3);
        let mu = vec![1.0 / states as f64; states];
        let label = format!("{}x{states}", game.num_joint());
        group.bench_function(BenchmarkId::new("state_values", &label), |b| {
            b.iter(|| state_values(&game, black_box(&policy)))
        });
        group.bench_function(BenchmarkId::new("gradient", &label), |b| {
            b.iter(|| exact_gradient_all(&game, black_box(&policy), &mu))
        });
    }
    group.finish();
}

fn sampled_gradient(c: &mut Criterion) {
    let game = congestion_fixture(8, 4);
    let params = JointPolicy::uniform(game.action_counts(), game.num_states());
    let mut group = c.benchmark_group("reinforce");
    group.sample_size(20);
    for batch in [1usize, 20] {
        group.bench_with_input(BenchmarkId::new("congestion_8x4", batch), &batch, |b, &batch| {
            b.iter(|| reinforce_estimate(&game, &params, 0.01, batch, HorizonMode::Episodic { length: 20 }, 7, 0))
        });
    }
    group.finish();
}

criterion_group!(benches, simplex, exact_kernels, sampled_gradient);
criterion_main!(benches);
