//! Seeded synthetic mobility traces with exported ground truth.
//!
//! Every person has a home with two night sightings per day (00:30 and
//! 22:30 UTC). Transient persons additionally visit venues in three daytime
//! slots (09:00, 13:00, 17:00): an arrival sighting, a departure sighting
//! 60-150 minutes later and a home sighting 20-40 minutes after that. Each
//! attraction venue is guaranteed `min_visitors_per_venue` distinct visitors;
//! minor venues get exactly one visitor.
//!
//! Ping-pong pairs are injected as `X, decoy, X` sightings two minutes apart
//! inside a stay at `X` (a night at home or a venue visit), so every injected
//! pair spans 240 s while every genuine back-and-forth spans at least an hour.
//! Ground truth therefore holds for any ping-pong window in `[240 s, 3600 s)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo;
use crate::grid::CensusBaseline;
use crate::types::{format_timestamp, ObservationWindow, Timestamp, SECONDS_PER_DAY};

const MIN: i64 = 60;
const SLOT_STARTS: [i64; 3] = [9 * 60 * MIN, 13 * 60 * MIN, 17 * 60 * MIN];
const NIGHT_SIGHTINGS: [i64; 2] = [30 * MIN, 22 * 60 * MIN + 30 * MIN];
const PINGPONG_AT_HOME: i64 = 3 * 60 * MIN;
const PINGPONG_STEP: i64 = 2 * MIN;
const N_DECOYS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub n_venues: usize,
    /// Relative visit weight among categories.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_persons: usize,
    pub n_days: u32,
    /// Start of the observation window, epoch seconds (midnight UTC).
    pub start: Timestamp,
    pub transient_fraction: f64,
    pub categories: Vec<CategorySpec>,
    /// Probability that a transient person uses a free daytime slot.
    pub visit_probability: f64,
    pub min_visitors_per_venue: usize,
    pub n_minor_venues: usize,
    /// Probability of one injected ping-pong pair per night at home and per
    /// venue visit.
    pub pingpong_injection_rate: f64,
    /// Probability of timestamp jitter per sighting and of a spurious extra
    /// sighting per person-day. Ground truth is exact only at 0.
    pub noise: f64,
    pub city_lat: f64,
    pub city_lon: f64,
    /// City extent in grid cells per side.
    pub city_cells: u32,
    pub cell_size: f64,
    /// Fraction of attraction venues placed in remote, census-absent cells.
    pub outback_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_persons: 200,
            n_days: 7,
            start: 1_456_790_400, // 2016-03-01T00:00:00Z
            transient_fraction: 0.4,
            categories: vec![
                CategorySpec { name: "Restaurant".into(), n_venues: 5, weight: 0.5 },
                CategorySpec { name: "MarketPlace".into(), n_venues: 5, weight: 0.3 },
                CategorySpec { name: "Pub".into(), n_venues: 5, weight: 0.2 },
            ],
            visit_probability: 0.5,
            min_visitors_per_venue: 3,
            n_minor_venues: 4,
            pingpong_injection_rate: 0.1,
            noise: 0.0,
            city_lat: -33.87,
            city_lon: 151.21,
            city_cells: 4,
            cell_size: 0.05,
            outback_fraction: 0.3,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::SynthConfig { field, reason: reason.into() }
}

impl SynthConfig {
    pub fn n_transient(&self) -> usize {
        (self.n_persons as f64 * self.transient_fraction).round() as usize
    }

    fn n_attractions(&self) -> usize {
        self.categories.iter().map(|c| c.n_venues).sum()
    }

    pub fn observation_window(&self) -> ObservationWindow {
        ObservationWindow {
            start: self.start,
            end: self.start + self.n_days as i64 * SECONDS_PER_DAY - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} is outside [0, 1]")))
            }
        };
        unit("transient_fraction", self.transient_fraction)?;
        unit("visit_probability", self.visit_probability)?;
        unit("pingpong_injection_rate", self.pingpong_injection_rate)?;
        unit("noise", self.noise)?;
        unit("outback_fraction", self.outback_fraction)?;
        if self.n_days == 0 {
            return Err(invalid("n_days", "must be >= 1"));
        }
        if self.start.rem_euclid(SECONDS_PER_DAY) != 0 {
            return Err(invalid("start", "must be a UTC midnight"));
        }
        if geo::check_cell_size(self.cell_size).is_err() {
            return Err(invalid("cell_size", "must be positive"));
        }
        if self.city_cells == 0 {
            return Err(invalid("city_cells", "must be >= 1"));
        }
        if !(-80.0..=80.0).contains(&self.city_lat) || !(-170.0..=170.0).contains(&self.city_lon) {
            return Err(invalid("city_lat", "city centre too close to the map edge"));
        }
        if self.min_visitors_per_venue == 0 {
            return Err(invalid("min_visitors_per_venue", "must be >= 1"));
        }
        let mut names = BTreeSet::new();
        for c in &self.categories {
            if c.name.trim().is_empty() || !names.insert(c.name.as_str()) {
                return Err(invalid("categories", "names must be non-empty and distinct"));
            }
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(invalid("categories", format!("weight of {} must be >= 0", c.name)));
            }
        }
        let nt = self.n_transient();
        let venues = self.n_attractions();
        if nt > 0 && venues > 0 {
            if self.categories.iter().all(|c| c.n_venues == 0 || c.weight == 0.0) {
                return Err(invalid("categories", "at least one category with venues needs positive weight"));
            }
            if nt < self.min_visitors_per_venue {
                return Err(invalid(
                    "transient_fraction",
                    format!("{nt} transient persons cannot give each venue {} visitors", self.min_visitors_per_venue),
                ));
            }
            let forced = venues * self.min_visitors_per_venue + self.n_minor_venues;
            if forced.div_ceil(nt) > self.n_days as usize * SLOT_STARTS.len() {
                return Err(invalid("n_days", "too few daytime slots for the guaranteed venue visits"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub homes: BTreeMap<String, String>,
    pub transients: Vec<String>,
    pub true_edges_per_person: BTreeMap<String, u64>,
    pub true_dwell_seconds_per_person: BTreeMap<String, i64>,
    pub attraction_venues: Vec<String>,
    pub injected_pingpong_pairs: u64,
    pub n_persons: usize,
    pub n_locations: usize,
    pub n_events: usize,
    /// Cells holding remote attractions, with no census population.
    pub census_absent_cells: Vec<[i64; 2]>,
    /// Visits (arrivals) per category, for ranking checks.
    pub visits_per_category: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Events in the ingest JSONL schema, ordered by time then person.
    pub events_jsonl: String,
    pub ground_truth: GroundTruth,
    pub census: CensusBaseline,
}

#[derive(Debug, Clone)]
struct Place {
    id: String,
    lat: f64,
    lon: f64,
    category: Option<String>,
}

#[derive(Serialize)]
struct JsonEvent<'a> {
    user: &'a str,
    lat: f64,
    lon: f64,
    ts: String,
    venue: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<&'a str>,
}

struct Sighting {
    person: usize,
    place: usize,
    ts: Timestamp,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cs = config.cell_size;
    let row0 = geo::cell_index(config.city_lat, cs);
    let col0 = geo::cell_index(config.city_lon, cs);
    let n_city = config.city_cells as i64;

    // A point well inside the given cell, away from its edges.
    let point_in = |rng: &mut ChaCha8Rng, row: i64, col: i64| {
        let lat = (row as f64 + rng.random_range(0.2..0.8)) * cs;
        let lon = (col as f64 + rng.random_range(0.2..0.8)) * cs;
        (round6(lat), round6(lon))
    };
    let city_point = |rng: &mut ChaCha8Rng| {
        let r = row0 + rng.random_range(0..n_city);
        let c = col0 + rng.random_range(0..n_city);
        point_in(rng, r, c)
    };

    let mut places: Vec<Place> = Vec::new();
    let add_place = |places: &mut Vec<Place>, id: String, (lat, lon): (f64, f64), category: Option<String>| {
        places.push(Place { id, lat, lon, category });
        places.len() - 1
    };

    let persons: Vec<String> = (0..config.n_persons).map(|i| format!("u{i:05}")).collect();
    let homes: Vec<usize> = persons
        .iter()
        .map(|p| {
            let pt = city_point(&mut rng);
            add_place(&mut places, format!("home:{p}"), pt, None)
        })
        .collect();
    let decoys: Vec<usize> = (0..N_DECOYS)
        .map(|k| {
            let pt = city_point(&mut rng);
            add_place(&mut places, format!("pp:{k}"), pt, None)
        })
        .collect();

    // Attraction venues per category; a shuffled subset goes to remote cells,
    // one cell each, far from the city.
    let n_attr = config.n_attractions();
    let n_outback = (n_attr as f64 * config.outback_fraction).round() as usize;
    let mut remote: Vec<bool> = (0..n_attr).map(|i| i < n_outback).collect();
    remote.shuffle(&mut rng);
    let mut venues_by_category: Vec<Vec<usize>> = Vec::new();
    let mut attractions: Vec<usize> = Vec::new();
    let mut census_absent_cells = Vec::new();
    let mut k = 0;
    for cat in &config.categories {
        let mut ids = Vec::new();
        for j in 0..cat.n_venues {
            let pt = if remote[k] {
                let (r, c) = (row0 - 40 - 3 * k as i64, col0 + 60 + 3 * k as i64);
                census_absent_cells.push([r, c]);
                point_in(&mut rng, r, c)
            } else {
                city_point(&mut rng)
            };
            let slug = cat.name.to_lowercase().replace(char::is_whitespace, "_");
            let idx = add_place(&mut places, format!("{slug}:{j}"), pt, Some(cat.name.clone()));
            ids.push(idx);
            attractions.push(idx);
            k += 1;
        }
        venues_by_category.push(ids);
    }
    census_absent_cells.sort();
    let minors: Vec<usize> = (0..config.n_minor_venues)
        .map(|j| {
            let pt = city_point(&mut rng);
            add_place(&mut places, format!("minor:{j}"), pt, Some("Minor".into()))
        })
        .collect();

    // Transient subpopulation and guaranteed visits.
    let nt = config.n_transient();
    let mut order: Vec<usize> = (0..config.n_persons).collect();
    order.shuffle(&mut rng);
    let mut transient_idx: Vec<usize> = order[..nt].to_vec();
    transient_idx.sort_unstable();
    let mut forced: Vec<Vec<usize>> = vec![Vec::new(); config.n_persons];
    if nt > 0 {
        let m = config.min_visitors_per_venue;
        for (vi, &venue) in attractions.iter().enumerate() {
            for j in 0..m {
                forced[transient_idx[(vi * m + j) % nt]].push(venue);
            }
        }
        for (mi, &venue) in minors.iter().enumerate() {
            forced[transient_idx[(attractions.len() * m + mi) % nt]].push(venue);
        }
    }
    let weighted: Vec<(usize, f64)> = config
        .categories
        .iter()
        .enumerate()
        .filter(|(ci, c)| c.weight > 0.0 && !venues_by_category[*ci].is_empty())
        .map(|(ci, c)| (ci, c.weight))
        .collect();
    let weight_total: f64 = weighted.iter().map(|w| w.1).sum();

    let mut sightings: Vec<Sighting> = Vec::new();
    let mut truth_edges = BTreeMap::new();
    let mut truth_dwell = BTreeMap::new();
    let mut injected = 0u64;
    let mut visits_per_category: BTreeMap<String, u64> = BTreeMap::new();
    let is_transient: BTreeSet<usize> = transient_idx.iter().copied().collect();

    for p in 0..config.n_persons {
        let home = homes[p];
        let mut edges = 0u64;
        let mut dwell = 0i64;
        let mut queue = forced[p].iter().copied();
        for d in 0..config.n_days as i64 {
            let day = config.start + d * SECONDS_PER_DAY;
            sightings.push(Sighting { person: p, place: home, ts: day + NIGHT_SIGHTINGS[0] });
            if rng.random_bool(config.pingpong_injection_rate) {
                let t = day + PINGPONG_AT_HOME;
                let decoy = decoys[rng.random_range(0..decoys.len())];
                sightings.push(Sighting { person: p, place: home, ts: t });
                sightings.push(Sighting { person: p, place: decoy, ts: t + PINGPONG_STEP });
                sightings.push(Sighting { person: p, place: home, ts: t + 2 * PINGPONG_STEP });
                injected += 1;
            }
            if is_transient.contains(&p) {
                for slot in SLOT_STARTS {
                    let venue = match queue.next() {
                        Some(v) => v,
                        None if weight_total > 0.0 && rng.random_bool(config.visit_probability) => {
                            let mut x = rng.random_range(0.0..weight_total);
                            let mut ci = weighted[weighted.len() - 1].0;
                            for &(c, w) in &weighted {
                                if x < w {
                                    ci = c;
                                    break;
                                }
                                x -= w;
                            }
                            let pool = &venues_by_category[ci];
                            pool[rng.random_range(0..pool.len())]
                        }
                        None => continue,
                    };
                    let arrive = day + slot + rng.random_range(0..=30) * MIN;
                    let leave = arrive + rng.random_range(60..=150) * MIN;
                    let back = leave + rng.random_range(20..=40) * MIN;
                    sightings.push(Sighting { person: p, place: venue, ts: arrive });
                    if rng.random_bool(config.pingpong_injection_rate) {
                        let decoy = decoys[rng.random_range(0..decoys.len())];
                        sightings.push(Sighting { person: p, place: decoy, ts: arrive + PINGPONG_STEP });
                        sightings.push(Sighting { person: p, place: venue, ts: arrive + 2 * PINGPONG_STEP });
                        injected += 1;
                    }
                    sightings.push(Sighting { person: p, place: venue, ts: leave });
                    sightings.push(Sighting { person: p, place: home, ts: back });
                    edges += 2;
                    dwell += back - arrive;
                    if let Some(c) = &places[venue].category {
                        *visits_per_category.entry(c.clone()).or_default() += 1;
                    }
                }
            }
            sightings.push(Sighting { person: p, place: home, ts: day + NIGHT_SIGHTINGS[1] });
            if config.noise > 0.0 && rng.random_bool(config.noise) {
                let all: Vec<usize> = attractions.iter().chain(&minors).copied().collect();
                if !all.is_empty() {
                    let v = all[rng.random_range(0..all.len())];
                    let ts = day + rng.random_range(7 * 3600..20 * 3600);
                    sightings.push(Sighting { person: p, place: v, ts });
                }
            }
        }
        truth_edges.insert(persons[p].clone(), edges);
        truth_dwell.insert(persons[p].clone(), dwell);
    }

    if config.noise > 0.0 {
        let window = config.observation_window();
        for s in &mut sightings {
            if rng.random_bool(config.noise) {
                s.ts = (s.ts + rng.random_range(-900..=900)).clamp(window.start, window.end);
            }
        }
    }
    sightings.sort_by(|a, b| a.ts.cmp(&b.ts).then(a.person.cmp(&b.person)).then(a.place.cmp(&b.place)));
    sightings.dedup_by(|a, b| a.ts == b.ts && a.person == b.person && a.place == b.place);

    let mut events_jsonl = String::with_capacity(sightings.len() * 110);
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for s in &sightings {
        let place = &places[s.place];
        used.insert(s.place);
        let line = JsonEvent {
            user: &persons[s.person],
            lat: place.lat,
            lon: place.lon,
            ts: format_timestamp(s.ts),
            venue: &place.id,
            category: place.category.as_deref(),
        };
        events_jsonl.push_str(&serde_json::to_string(&line)?);
        events_jsonl.push('\n');
    }

    // Census: background population in every city cell plus residents.
    let mut cells: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for r in row0..row0 + n_city {
        for c in col0..col0 + n_city {
            cells.insert((r, c), 500.0);
        }
    }
    for &h in &homes {
        *cells.entry(geo::cell_of(places[h].lat, places[h].lon, cs)).or_default() += 100.0;
    }

    let attraction_venues: Vec<String> = if nt > 0 {
        let mut v: Vec<String> = attractions.iter().map(|&i| places[i].id.clone()).collect();
        v.sort();
        v
    } else {
        Vec::new()
    };
    let ground_truth = GroundTruth {
        homes: persons.iter().zip(&homes).map(|(p, &h)| (p.clone(), places[h].id.clone())).collect(),
        transients: transient_idx.iter().map(|&i| persons[i].clone()).collect(),
        true_edges_per_person: truth_edges,
        true_dwell_seconds_per_person: truth_dwell,
        attraction_venues,
        injected_pingpong_pairs: injected,
        n_persons: config.n_persons,
        n_locations: used.len(),
        n_events: sightings.len(),
        census_absent_cells: if nt > 0 { census_absent_cells } else { Vec::new() },
        visits_per_category,
    };
    Ok(SynthOutput {
        events_jsonl,
        ground_truth,
        census: CensusBaseline { cell_size: cs, cells },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn small() -> SynthConfig {
        SynthConfig { n_persons: 30, n_days: 3, ..SynthConfig::default() }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.events_jsonl, b.events_jsonl);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn distinct_seeds_give_distinct_event_multisets() {
        let hashes: BTreeSet<u64> = (0..10)
            .map(|seed| {
                let out = generate(&SynthConfig { seed, ..small() }).unwrap();
                let mut lines: Vec<&str> = out.events_jsonl.lines().collect();
                lines.sort_unstable();
                let mut h = DefaultHasher::new();
                lines.hash(&mut h);
                h.finish()
            })
            .collect();
        assert_eq!(hashes.len(), 10);
    }

    #[test]
    fn zero_transient_fraction_has_no_transients() {
        let out = generate(&SynthConfig { transient_fraction: 0.0, ..small() }).unwrap();
        assert!(out.ground_truth.transients.is_empty());
        assert!(out.ground_truth.attraction_venues.is_empty());
        assert!(out.ground_truth.true_edges_per_person.values().all(|&e| e == 0));
    }

    #[test]
    fn invalid_config_names_the_field() {
        let err = generate(&SynthConfig { noise: 1.5, ..small() }).unwrap_err();
        assert!(matches!(err, Error::SynthConfig { field: "noise", .. }));
        let err = generate(&SynthConfig { n_persons: 5, transient_fraction: 0.2, ..small() }).unwrap_err();
        assert!(matches!(err, Error::SynthConfig { field: "transient_fraction", .. }));
        let err = generate(&SynthConfig { n_days: 0, ..small() }).unwrap_err();
        assert!(matches!(err, Error::SynthConfig { field: "n_days", .. }));
    }

    #[test]
    fn events_lie_inside_the_window() {
        let cfg = small();
        let out = generate(&cfg).unwrap();
        let w = cfg.observation_window();
        for line in out.events_jsonl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let ts = crate::types::parse_timestamp(v["ts"].as_str().unwrap()).unwrap();
            assert!(w.contains(ts));
        }
        assert_eq!(out.events_jsonl.lines().count(), out.ground_truth.n_events);
    }
}
