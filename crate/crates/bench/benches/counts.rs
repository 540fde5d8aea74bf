use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lipconj_core::gap_example::gamma_prime;
use lipconj_core::markov_chain::{path_counts, scaled_log_counts, taboo_counts};
use lipconj_core::State;

fn counts(c: &mut Criterion) {
    let ts = gamma_prime();
    let zero = State::new(0, 0);
    let mut group = c.benchmark_group("gamma_prime_counts");
    for n in [50usize, 200, 400] {
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |b, &n| {
            b.iter(|| path_counts(&ts, &zero, &zero, n).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("scaled", n), &n, |b, &n| {
            b.iter(|| scaled_log_counts(&ts, &zero, &zero, n).unwrap())
        });
    }
    group.bench_function("taboo_100", |b| b.iter(|| taboo_counts(&ts, &zero, 100).unwrap()));
    group.finish();
}

criterion_group!(benches, counts);
criterion_main!(benches);
