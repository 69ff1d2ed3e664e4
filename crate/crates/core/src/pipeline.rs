//! End-to-end evaluation over a canonical event batch.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{base_map, BaseAssignment};
use crate::discovery::{self, CategoryRank, LocationCatalog};
use crate::error::Result;
use crate::geo;
use crate::grid::{self, CellDiff, CellKey, CensusBaseline, GridCell};
use crate::ingest::EventBatch;
use crate::model::{self, DurationSummary, LocationStats, ModelParams, MovementEdge, PersonProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub params: ModelParams,
    pub cell_size: f64,
    pub min_unique_visitors: u64,
    pub absent_threshold: f64,
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub eta: usize,
    pub gamma: usize,
    #[serde(rename = "W")]
    pub w: f64,
    pub theta_seconds: i64,
    pub beta: f64,
    pub pingpong_window_seconds: i64,
    pub max_dwell_cap_seconds: Option<i64>,
    pub window_start: i64,
    pub window_end: i64,
    pub source_records: usize,
    pub accepted_events: usize,
    pub rejected_records: usize,
    pub raw_edges: u64,
    pub suppressed_edges: u64,
    pub transient_locations: usize,
    pub flagged_cells: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub bases: BTreeMap<String, BaseAssignment>,
    pub profiles: Vec<PersonProfile>,
    /// Suppressed edges of all persons, person by person.
    pub edges: Vec<MovementEdge>,
    pub catalog: LocationCatalog,
    /// Every location, ranked by `(Q desc, unique_visitors desc, id asc)`.
    pub locations: Vec<LocationStats>,
    pub categories: Vec<CategoryRank>,
    pub grid: BTreeMap<CellKey, GridCell>,
    pub cell_diff: Vec<CellDiff>,
    pub duration: DurationSummary,
    pub summary: RunSummary,
}

impl PipelineOutput {
    pub fn flagged_locations(&self) -> impl Iterator<Item = &LocationStats> {
        self.locations.iter().filter(|l| l.is_transient_location)
    }
}

/// Runs the model on a canonicalized batch with the given base assignments.
pub fn run(
    batch: &EventBatch,
    bases: BTreeMap<String, BaseAssignment>,
    options: &PipelineOptions,
    census: Option<&CensusBaseline>,
) -> Result<PipelineOutput> {
    let params = &options.params;
    params.validate()?;
    geo::check_cell_size(options.cell_size)?;

    let analyses: Vec<model::PersonAnalysis> = batch
        .person_slices()
        .into_par_iter()
        .map(|(person, events)| {
            let base = bases.get(person).map(|b| b.base_location.as_str()).unwrap_or("");
            model::analyze_person(events, base, params)
        })
        .collect();

    let mut profiles = Vec::with_capacity(analyses.len());
    let mut edges = Vec::new();
    for a in analyses {
        profiles.push(a.profile);
        edges.extend(a.edges);
    }

    let w = model::cumulative_estimate(&profiles)?;
    let duration = model::transient_duration(&profiles, params);
    let population = model::summarize_population(&profiles, &batch.events);

    let catalog = LocationCatalog::from_events(&batch.events);
    let base_ids = base_map(&bases);
    let stats = discovery::complete_stats(model::location_agglomeration(&edges, &base_ids), &catalog);
    let locations = discovery::discover_transient_locations(&stats, &bases, options.min_unique_visitors)?;
    let flagged: Vec<LocationStats> = locations.iter().filter(|l| l.is_transient_location).cloned().collect();
    let categories = discovery::rank_categories(&flagged);

    let grid = grid::grid_aggregate(&edges, params.beta, options.cell_size)?;
    let cell_diff = grid::census_diff(&grid, census, options.cell_size, options.absent_threshold)?;

    let raw_edges = profiles.iter().map(|p| p.raw_edge_count as u64).sum();
    let summary = RunSummary {
        n: population.persons,
        eta: population.transient,
        gamma: population.locations,
        w,
        theta_seconds: duration.total_seconds,
        beta: params.beta,
        pingpong_window_seconds: params.pingpong_window,
        max_dwell_cap_seconds: params.max_dwell_cap,
        window_start: params.observation_window.start,
        window_end: params.observation_window.end,
        source_records: batch.source_count,
        accepted_events: batch.accepted_count(),
        rejected_records: batch.rejected.len(),
        raw_edges,
        suppressed_edges: edges.len() as u64,
        transient_locations: flagged.len(),
        flagged_cells: cell_diff.iter().filter(|c| c.flagged).count(),
    };

    Ok(PipelineOutput {
        bases,
        profiles,
        edges,
        catalog,
        locations,
        categories,
        grid,
        cell_diff,
        duration,
        summary,
    })
}
