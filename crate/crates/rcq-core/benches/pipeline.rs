//! Benchmarks for the data-parallel batch surfaces: capture verification of
//! (query, structure) cells sequentially versus on the rayon pool, plus the
//! single-query translation pipeline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rcq_core::corpus::{
    capture_cells, generated_corpus, verify_capture_batch_par, verify_capture_batch_seq,
};
use rcq_core::datagolf::training_db;
use rcq_core::translate::{rw, TransConfig};

fn capture_batch(c: &mut Criterion) {
    let queries = generated_corpus(0..12, 12);
    let cells = capture_cells(&queries, &[2, 5], &[0, 1]);
    let mut group = c.benchmark_group("capture_batch");
    group.sample_size(10);
    group.bench_with_input(
        BenchmarkId::new("seq", cells.len()),
        &cells,
        |b, cells| {
            b.iter(|| {
                let outcomes = verify_capture_batch_seq(cells);
                assert!(outcomes.iter().all(|o| o.ok));
            })
        },
    );
    group.bench_with_input(
        BenchmarkId::new("par", cells.len()),
        &cells,
        |b, cells| {
            b.iter(|| {
                let outcomes = verify_capture_batch_par(cells);
                assert!(outcomes.iter().all(|o| o.ok));
            })
        },
    );
    group.finish();
}

fn translation(c: &mut Criterion) {
    let queries = generated_corpus(0..6, 14);
    let mut group = c.benchmark_group("translate");
    for (name, q) in &queries {
        let cfg = TransConfig::with_training(training_db(q));
        group.bench_with_input(BenchmarkId::new("rw", name), q, |b, q| {
            b.iter(|| rw(q, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, capture_batch, translation);
criterion_main!(benches);
