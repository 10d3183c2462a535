use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smmcts::engine::{run, EngineConfig, Variant};
use smmcts::game::{generate_random_game, RandomGameParams};
use smmcts::par;

fn cells() -> Vec<(u64, Variant)> {
    (0..16u64).flat_map(|g| Variant::ALL.into_iter().map(move |v| (g, v))).collect()
}

fn search(&(seed, variant): &(u64, Variant)) -> f64 {
    let game = generate_random_game(&RandomGameParams::uniform(2, 3, seed)).unwrap();
    let cfg = EngineConfig::variant(variant, 0.05, seed).unwrap();
    run(&game, cfg, 20_000).unwrap().diagnostics.root_mean.unwrap()
}

fn bench(c: &mut Criterion) {
    let cells = cells();
    let mut group = c.benchmark_group("search_cells");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", cells.len()), &cells, |b, cells| {
        b.iter(|| par::map_sequential(cells, search))
    });
    group.bench_with_input(BenchmarkId::new("parallel", cells.len()), &cells, |b, cells| {
        b.iter(|| par::map(cells, search))
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
