use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levytree::additive::{additive_a_levels, additive_a_tip, exit_family, max_tip_local_time, uniform_level_grid};
use levytree::exploration::{height_brownian, stable_skeleton};
use levytree::pathsim::{sample_brownian_levy, sample_stable_levy};
use levytree::rtree::{embedded_tree, tree_distance_idx};
use levytree::snake::{grow_snake_with_minima, SpatialMotion};
use levytree_bench::fixture_excursion;

fn paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("pathsim");
    for dt in [1e-3, 1e-4] {
        g.bench_with_input(BenchmarkId::new("brownian_height", dt), &dt, |b, &dt| {
            b.iter(|| height_brownian(&sample_brownian_levy(1.0, 1.0, dt, 7).unwrap(), 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("stable_levy", dt), &dt, |b, &dt| {
            b.iter(|| sample_stable_levy(1.5, 1.0, 1.0, dt, 7).unwrap())
        });
    }
    g.bench_function("stable_skeleton_1e-3", |b| b.iter(|| stable_skeleton(1.5, 1.0, 1e-3, 7).unwrap()));
    g.finish();
}

fn snake(c: &mut Criterion) {
    let dt = 1e-4;
    let (h, m) = fixture_excursion(dt, 0.5, 3);
    let motion = SpatialMotion::bridge_exact(dt.sqrt() / 4.0).unwrap();
    let eps = 2.0 * dt.sqrt();
    c.bench_function("grow_snake", |b| b.iter(|| grow_snake_with_minima(&h, &m, dt, motion, 0.0, 0.0, 5).unwrap()));
    let st = grow_snake_with_minima(&h, &m, dt, motion, 0.0, 0.0, 5).unwrap();
    c.bench_function("additive_a_tip", |b| b.iter(|| additive_a_tip(&st, eps).unwrap()));
    let grid = uniform_level_grid(max_tip_local_time(&st), 0.002).unwrap();
    c.bench_function("additive_a_levels", |b| {
        b.iter(|| additive_a_levels(&exit_family(&st, &grid, eps).unwrap()))
    });
}

fn trees(c: &mut Criterion) {
    let dt = 1e-4;
    let (h, _) = fixture_excursion(dt, 0.5, 3);
    let e = levytree::LatticePath::new(dt, h).unwrap();
    let n = e.len();
    c.bench_function("tree_distance_idx", |b| b.iter(|| tree_distance_idx(&e, black_box(n / 5), black_box(4 * n / 5))));
    let marks: Vec<f64> = (1..=6).map(|i| e.horizon() * i as f64 / 7.0).collect();
    c.bench_function("embedded_tree_6", |b| b.iter(|| embedded_tree(&e, black_box(&marks)).unwrap()));
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = paths, snake, trees
);
criterion_main!(benches);
