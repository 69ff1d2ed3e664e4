//! Transient population model: movement extraction, ping-pong suppression,
//! per-person movement profiles and the population-level aggregates.
//!
//! A movement is one transition between consecutive sightings at distinct
//! locations. The profile of person `i` is `M_i = beta * |suppressed edges|`,
//! the cumulative estimate is `W = sum_i M_i`, the agglomeration `Q(l)` counts
//! arrivals at `l` by persons not based there, and the duration `Theta` sums
//! dwell time at non-base locations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::types::{MobilityEvent, ObservationWindow, Timestamp, SECONDS_PER_HOUR};

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_PINGPONG_WINDOW_SECS: i64 = 15 * 60;
pub const DEFAULT_MAX_DWELL_CAP_SECS: i64 = 12 * SECONDS_PER_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Global damping constant in `(0, 1]`.
    pub beta: f64,
    /// Ping-pong span threshold in seconds; 0 disables suppression.
    pub pingpong_window: i64,
    /// Per-interval dwell cap in seconds; `None` is unbounded.
    pub max_dwell_cap: Option<i64>,
    pub observation_window: ObservationWindow,
}

impl ModelParams {
    pub fn new(observation_window: ObservationWindow) -> Self {
        Self {
            beta: DEFAULT_BETA,
            pingpong_window: DEFAULT_PINGPONG_WINDOW_SECS,
            max_dwell_cap: Some(DEFAULT_MAX_DWELL_CAP_SECS),
            observation_window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(config(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.pingpong_window < 0 {
            return Err(config("pingpong window must be >= 0"));
        }
        if let Some(cap) = self.max_dwell_cap {
            if cap <= 0 {
                return Err(config("max dwell cap must be > 0"));
            }
        }
        Ok(())
    }

    fn cap(&self, secs: i64) -> i64 {
        match self.max_dwell_cap {
            Some(cap) => secs.min(cap),
            None => secs,
        }
    }
}

/// A directed transition `from -> to` by one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementEdge {
    pub person_id: String,
    pub from_location: String,
    pub to_location: String,
    /// Last sighting at `from_location`.
    pub depart_ts: Timestamp,
    /// First sighting at `to_location`.
    pub arrive_ts: Timestamp,
    pub arrive_lat: f64,
    pub arrive_lon: f64,
}

impl MovementEdge {
    fn reverses(&self, next: &MovementEdge) -> bool {
        self.person_id == next.person_id
            && self.from_location == next.to_location
            && self.to_location == next.from_location
    }
}

/// Stay at a non-base location. `end` is the first sighting elsewhere, or
/// `None` when the stay runs to the end of the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellInterval {
    pub location_id: String,
    pub start: Timestamp,
    pub end: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub person_id: String,
    pub base_location: String,
    pub raw_edge_count: usize,
    pub suppressed_edge_count: usize,
    pub movement_profile: f64,
    pub is_transient: bool,
    pub dwell_intervals: Vec<DwellInterval>,
    pub params: ModelParams,
}

/// Per-event output of the transient function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransientFlags {
    pub flags: Vec<bool>,
    pub is_transient: bool,
}

/// Flags every event that is an endpoint of a movement or lies away from the
/// base. Operates on the raw sequence, before ping-pong suppression.
pub fn classify_transient(events: &[MobilityEvent], base: &str) -> TransientFlags {
    let mut flags: Vec<bool> = events.iter().map(|e| e.location_id != base).collect();
    for i in 1..events.len() {
        if events[i - 1].location_id != events[i].location_id {
            flags[i - 1] = true;
            flags[i] = true;
        }
    }
    let is_transient = flags.iter().any(|&f| f);
    TransientFlags { flags, is_transient }
}

/// One edge per consecutive pair of sightings at distinct locations.
pub fn movement_edges(events: &[MobilityEvent]) -> Vec<MovementEdge> {
    events
        .windows(2)
        .filter(|w| w[0].location_id != w[1].location_id)
        .map(|w| MovementEdge {
            person_id: w[1].person_id.clone(),
            from_location: w[0].location_id.clone(),
            to_location: w[1].location_id.clone(),
            depart_ts: w[0].timestamp,
            arrive_ts: w[1].timestamp,
            arrive_lat: w[1].lat,
            arrive_lon: w[1].lon,
        })
        .collect()
}

/// Start indices of the adjacent `(A->B, B->A)` pairs removed by the
/// left-to-right scan. A removed pair is skipped as a whole; its neighbours
/// are not re-examined against each other.
pub fn ping_pong_pairs(edges: &[MovementEdge], window: i64) -> Vec<usize> {
    let mut removed = Vec::new();
    if window <= 0 {
        return removed;
    }
    let mut i = 0;
    while i + 1 < edges.len() {
        let (a, b) = (&edges[i], &edges[i + 1]);
        if a.reverses(b) && b.arrive_ts - a.depart_ts <= window {
            removed.push(i);
            i += 2;
        } else {
            i += 1;
        }
    }
    removed
}

/// Removes ping-pong pairs whose combined span is within `window` seconds.
/// `window == 0` returns the input unchanged.
pub fn suppress_ping_pong(edges: &[MovementEdge], window: i64) -> Vec<MovementEdge> {
    let pairs = ping_pong_pairs(edges, window);
    let mut out = Vec::with_capacity(edges.len() - 2 * pairs.len());
    let mut pairs = pairs.into_iter().peekable();
    let mut i = 0;
    while i < edges.len() {
        if pairs.peek() == Some(&i) {
            pairs.next();
            i += 2;
        } else {
            out.push(edges[i].clone());
            i += 1;
        }
    }
    out
}

pub fn movement_profile(suppressed: &[MovementEdge], params: &ModelParams) -> f64 {
    params.beta * suppressed.len() as f64
}

/// A person's profile together with the suppressed edges it was built from.
#[derive(Debug, Clone)]
pub struct PersonAnalysis {
    pub profile: PersonProfile,
    pub edges: Vec<MovementEdge>,
}

/// Runs extraction, suppression, profile and dwell computation for one
/// person's time-sorted sequence.
pub fn analyze_person(events: &[MobilityEvent], base: &str, params: &ModelParams) -> PersonAnalysis {
    let person_id = events.first().map(|e| e.person_id.clone()).unwrap_or_default();
    let raw = movement_edges(events);
    let pairs = ping_pong_pairs(&raw, params.pingpong_window);

    // Runs of same-location sightings; raw edge i joins run i to run i + 1,
    // so a removed pair starting at i drops run i + 1.
    let runs: Vec<&[MobilityEvent]> = events.chunk_by(|a, b| a.location_id == b.location_id).collect();
    let mut dropped = vec![false; runs.len()];
    for &i in &pairs {
        dropped[i + 1] = true;
    }
    // Surviving runs, merged where a dropped run separated two stays at the
    // same place: (location, first sighting).
    let mut stays: Vec<(&str, Timestamp)> = Vec::new();
    for (run, _) in runs.iter().zip(&dropped).filter(|(_, d)| !**d) {
        let loc = run[0].location_id.as_str();
        if stays.last().map(|s| s.0) != Some(loc) {
            stays.push((loc, run[0].timestamp));
        }
    }
    let dwell_intervals: Vec<DwellInterval> = stays
        .iter()
        .enumerate()
        .filter(|(_, (loc, _))| *loc != base)
        .map(|(k, (loc, start))| DwellInterval {
            location_id: loc.to_string(),
            start: *start,
            end: stays.get(k + 1).map(|s| s.1),
        })
        .collect();

    let edges = suppress_ping_pong(&raw, params.pingpong_window);
    let is_transient = !edges.is_empty() || !dwell_intervals.is_empty();
    let profile = PersonProfile {
        person_id,
        base_location: base.to_string(),
        raw_edge_count: raw.len(),
        suppressed_edge_count: edges.len(),
        movement_profile: movement_profile(&edges, params),
        is_transient,
        dwell_intervals,
        params: *params,
    };
    PersonAnalysis { profile, edges }
}

/// `W = sum of M_i`. Summed as `beta * total suppressed edges`, which is the
/// same quantity without per-person rounding.
pub fn cumulative_estimate(profiles: &[PersonProfile]) -> Result<f64> {
    let Some(first) = profiles.first() else {
        return Ok(0.0);
    };
    if profiles.iter().any(|p| p.params != first.params) {
        return Err(Error::InconsistentParams);
    }
    let edges: u64 = profiles.iter().map(|p| p.suppressed_edge_count as u64).sum();
    Ok(first.params.beta * edges as f64)
}

/// Per-location arrival statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationStats {
    pub location_id: String,
    /// Arrivals by persons not based here.
    pub q: u64,
    pub unique_visitors: u64,
    /// Persons whose base is this location.
    pub resident_count: u64,
    pub category: Option<String>,
    pub is_transient_location: bool,
    /// All arrivals, including those at the arriving person's own base.
    pub inbound_edges: u64,
}

impl LocationStats {
    pub fn empty(location_id: &str) -> Self {
        Self {
            location_id: location_id.to_string(),
            q: 0,
            unique_visitors: 0,
            resident_count: 0,
            category: None,
            is_transient_location: false,
            inbound_edges: 0,
        }
    }
}

/// Aggregates suppressed edges by destination. Every destination with at
/// least one inbound edge appears in the map.
pub fn location_agglomeration(
    edges: &[MovementEdge],
    bases: &BTreeMap<String, String>,
) -> BTreeMap<String, LocationStats> {
    let mut stats: BTreeMap<String, LocationStats> = BTreeMap::new();
    let mut visitors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in edges {
        let s = stats
            .entry(e.to_location.clone())
            .or_insert_with(|| LocationStats::empty(&e.to_location));
        s.inbound_edges += 1;
        let own_base = bases.get(&e.person_id).is_some_and(|b| *b == e.to_location);
        if !own_base {
            s.q += 1;
            visitors.entry(&e.to_location).or_default().insert(&e.person_id);
        }
    }
    for (loc, who) in visitors {
        if let Some(s) = stats.get_mut(loc) {
            s.unique_visitors = who.len() as u64;
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DurationSummary {
    pub total_seconds: i64,
    pub per_person: BTreeMap<String, i64>,
}

/// Capped dwell of one interval. Open intervals run to the window end.
pub fn dwell_seconds(interval: &DwellInterval, params: &ModelParams) -> i64 {
    let end = interval.end.unwrap_or(params.observation_window.end);
    params.cap((end - interval.start).max(0))
}

pub fn transient_duration(profiles: &[PersonProfile], params: &ModelParams) -> DurationSummary {
    let mut summary = DurationSummary::default();
    for p in profiles {
        let secs: i64 = p.dwell_intervals.iter().map(|d| dwell_seconds(d, params)).sum();
        if secs > 0 || p.is_transient {
            summary.per_person.insert(p.person_id.clone(), secs);
        }
        summary.total_seconds += secs;
    }
    summary
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PopulationSummary {
    /// Distinct persons observed.
    pub persons: usize,
    /// Persons classified transient.
    pub transient: usize,
    /// Distinct locations across accepted events.
    pub locations: usize,
}

pub fn summarize_population(profiles: &[PersonProfile], events: &[MobilityEvent]) -> PopulationSummary {
    let persons: BTreeSet<&str> = events.iter().map(|e| e.person_id.as_str()).collect();
    let locations: BTreeSet<&str> = events.iter().map(|e| e.location_id.as_str()).collect();
    PopulationSummary {
        persons: persons.len(),
        transient: profiles.iter().filter(|p| p.is_transient).count(),
        locations: locations.len(),
    }
}
