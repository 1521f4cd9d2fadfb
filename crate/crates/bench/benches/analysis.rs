use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use tal_core::testkit::{random_declared, random_trace};
use tal_core::{audit, charge_accesses, optimal_tal, AccessList, AccessTrace, ForkConfig, GasSchedule};

fn traces(max_events: usize) -> Vec<(AccessTrace, AccessList)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..64)
        .map(|n| {
            let t = random_trace(&mut rng, n, max_events / 2, max_events);
            let d = random_declared(&mut rng, &t);
            (t, d)
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let schedule = GasSchedule::berlin();
    let fork = ForkConfig::default();
    for size in [16, 256] {
        let corpus = traces(size);
        let events: usize = corpus.iter().map(|(t, _)| t.events.len()).sum();
        let mut g = c.benchmark_group(format!("events_{size}"));
        g.throughput(Throughput::Elements(events as u64));
        g.bench_function(BenchmarkId::new("charge_accesses", size), |b| {
            b.iter(|| {
                for (t, d) in &corpus {
                    black_box(charge_accesses(t, d, &schedule, &fork).unwrap());
                }
            })
        });
        g.bench_function(BenchmarkId::new("optimal_tal", size), |b| {
            b.iter(|| {
                for (t, _) in &corpus {
                    black_box(optimal_tal(t, &schedule, &fork).unwrap());
                }
            })
        });
        g.bench_function(BenchmarkId::new("audit", size), |b| {
            b.iter(|| {
                for (t, d) in &corpus {
                    black_box(audit(t, d, &schedule, &fork).unwrap());
                }
            })
        });
        g.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);
