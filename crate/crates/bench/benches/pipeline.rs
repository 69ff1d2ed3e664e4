use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use transient_bench::{synthetic_batch, synthetic_jsonl};
use transient_core::base::assign_bases;
use transient_core::ingest::{parse_events, InputFormat, IngestOptions};
use transient_core::model::{movement_edges, suppress_ping_pong, ModelParams};
use transient_core::pipeline::{self, PipelineOptions};
use transient_core::{NightWindow, ObservationWindow};

const SIZES: [usize; 3] = [100, 1_000, 5_000];

fn bench_parse(c: &mut Criterion) {
    let mut group = c.benchmark_group("ingest/jsonl");
    for n in SIZES {
        let text = synthetic_jsonl(n, 7);
        group.throughput(Throughput::Bytes(text.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &text, |b, text| {
            b.iter(|| parse_events(black_box(text.as_bytes()), InputFormat::Jsonl, &IngestOptions::default()).unwrap());
        });
    }
    group.finish();
}

fn bench_suppression(c: &mut Criterion) {
    let batch = synthetic_batch(1_000, 7);
    let edges: Vec<_> = batch.persons().flat_map(|(_, evs)| movement_edges(evs)).collect();
    c.bench_function("model/suppress_ping_pong", |b| {
        b.iter(|| suppress_ping_pong(black_box(&edges), 900));
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline/run");
    group.sample_size(10);
    for n in SIZES {
        let batch = synthetic_batch(n, 7);
        let window = ObservationWindow::covering(&batch.events).unwrap();
        let options = PipelineOptions {
            params: ModelParams::new(window),
            cell_size: 0.05,
            min_unique_visitors: 3,
            absent_threshold: 0.0,
        };
        group.throughput(Throughput::Elements(batch.accepted_count() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &batch, |b, batch| {
            b.iter(|| {
                let bases = assign_bases(batch, NightWindow::default(), None).unwrap();
                pipeline::run(batch, bases, &options, None).unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_parse, bench_suppression, bench_pipeline);
criterion_main!(benches);
