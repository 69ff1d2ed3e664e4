//! Shared fixtures for the pipeline benchmarks.

use transient_core::ingest::{self, EventBatch, InputFormat, IngestOptions};
use transient_core::synth::{self, SynthConfig};

/// Generates and canonicalizes a synthetic batch of roughly
/// `n_persons * n_days * 3` events.
pub fn synthetic_batch(n_persons: usize, n_days: u32) -> EventBatch {
    let config = SynthConfig { n_persons, n_days, seed: 11, ..SynthConfig::default() };
    let out = synth::generate(&config).expect("valid bench config");
    let batch = ingest::parse_events(out.events_jsonl.as_bytes(), InputFormat::Jsonl, &IngestOptions::default())
        .expect("synthetic input parses");
    ingest::canonicalize(batch, config.cell_size).expect("positive cell size")
}

/// Raw JSONL for parse benchmarks.
pub fn synthetic_jsonl(n_persons: usize, n_days: u32) -> String {
    let config = SynthConfig { n_persons, n_days, seed: 11, ..SynthConfig::default() };
    synth::generate(&config).expect("valid bench config").events_jsonl
}
