use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use netreg_bench::bench_scenario;
use netreg_core::estimator::{self, FitConfig, RMode};
use netreg_core::network::NetworkEstimate;
use netreg_core::sim::{self, Population};

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for &n in &[250usize, 500, 1000] {
        let config = bench_scenario(n);
        let pop = Population::new(&config).expect("population");
        let data = sim::build_scenario(&config, &pop, 0).expect("scenario");
        let fit_config = FitConfig { r_mode: RMode::Fixed(1), ..FitConfig::new(4) };
        group.bench_with_input(BenchmarkId::new("model_free", n), &n, |b, _| {
            b.iter(|| {
                let est = NetworkEstimate::adjacency(data.a.clone());
                estimator::fit(&data.x.view(), &data.y.view(), &est, &fit_config).expect("fit")
            })
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_network");
    group.sample_size(10);
    for &n in &[1000usize, 2000] {
        let config = bench_scenario(n);
        let pop = Population::new(&config).expect("population");
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut i = 0u64;
            b.iter(|| {
                i += 1;
                let mut stream = netreg_core::rng::stream(7, &[i, 1]);
                netreg_core::network::sample_inhomogeneous_er(&pop.prob, &mut stream)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_sampling);
criterion_main!(benches);
