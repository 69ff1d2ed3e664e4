//! Transient population dynamics from geolocated mobility events.
//!
//! The pipeline ingests timestamped sightings, anchors each person to a base
//! location, extracts movements between locations, suppresses ping-pong
//! oscillation and aggregates the result per person, per location and per
//! grid cell:
//!
//! - [`ingest`]: parse, validate, deduplicate and order raw records.
//! - [`base`]: base (home) location inference and override pins.
//! - [`model`]: transient classification, movement profiles, cumulative
//!   estimate, location agglomeration and dwell duration.
//! - [`discovery`]: transient location flags and category ranking.
//! - [`grid`]: spatial binning and census comparison.
//! - [`synth`]: seeded synthetic traces with ground truth.
//! - [`oracle`]: brute-force reference evaluation for small instances.

pub mod base;
pub mod discovery;
pub mod error;
pub mod geo;
pub mod grid;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod types;

pub use base::{assign_bases, infer_base, BaseAssignment, BaseOverrides};
pub use discovery::{rank_categories, CategoryRank, LocationCatalog};
pub use error::{Error, Result};
pub use grid::{CensusBaseline, CellDiff, GridCell};
pub use ingest::{canonicalize, parse_events, EventBatch, InputFormat, IngestOptions, Rejection};
pub use model::{LocationStats, ModelParams, MovementEdge, PersonProfile};
pub use pipeline::{PipelineOptions, PipelineOutput, RunSummary};
pub use synth::{GroundTruth, SynthConfig};
pub use types::{MobilityEvent, NightWindow, ObservationWindow, Timestamp};
