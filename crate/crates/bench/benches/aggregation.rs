use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dissent_core::aggregation::win_percentage;
use dissent_core::divisiveness::pairwise_divisiveness_values;
use dissent_core::pairwise::ranks_to_pairs;
use dissent_core::synthgen::{generate, ElectorateSpec, Model};
use dissent_core::{
    bootstrap, BootstrapParams, PairwiseOptions, PairwiseRecord, PairwiseTally, ScoreFunction,
};

fn records(n_proposals: usize, n_users: usize) -> Vec<PairwiseRecord> {
    let spec = ElectorateSpec {
        n_proposals,
        n_users,
        model: Model::TwoBloc,
        divisive: [1, 2, 3].into_iter().collect(),
        noise: 0.1,
        seed: 1,
        panel_size: 6,
        panels_per_user: 20,
        ..Default::default()
    };
    let corpus = generate(&spec).unwrap();
    ranks_to_pairs(&corpus.catalog, &corpus.ranks)
        .unwrap()
        .records
}

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("scores");
    for users in [1_000, 10_000] {
        let r = records(60, users);
        g.bench_with_input(BenchmarkId::new("win_percentage", r.len()), &r, |b, r| {
            b.iter(|| win_percentage(&PairwiseTally::build(black_box(r), 60).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("bootstrap_win", r.len()), &r, |b, r| {
            b.iter(|| {
                bootstrap(
                    &ScoreFunction::Win,
                    black_box(r),
                    60,
                    &BootstrapParams::default(),
                )
                .unwrap()
            })
        });
        g.bench_with_input(
            BenchmarkId::new("pairwise_divisiveness", r.len()),
            &r,
            |b, r| {
                b.iter(|| {
                    pairwise_divisiveness_values(
                        black_box(r),
                        60,
                        &ScoreFunction::Win,
                        &PairwiseOptions::default(),
                    )
                    .unwrap()
                })
            },
        );
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench
}
criterion_main!(benches);
