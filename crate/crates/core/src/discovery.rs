//! Transient location discovery and category ranking.
//!
//! A location is a transient destination when it draws at least
//! `min_unique_visitors` distinct visitors and more visitors than residents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::base::BaseAssignment;
use crate::error::{config, Result};
use crate::model::LocationStats;
use crate::types::MobilityEvent;

pub const DEFAULT_MIN_UNIQUE_VISITORS: u64 = 3;
pub const UNCATEGORIZED: &str = "uncategorized";

/// Descriptive attributes of a location derived from its sightings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationInfo {
    pub mean_lat: f64,
    pub mean_lon: f64,
    /// Most frequent non-empty category; ties go to the smaller name.
    pub category: Option<String>,
    pub event_count: u64,
}

/// Every location observed in the accepted events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationCatalog(pub BTreeMap<String, LocationInfo>);

impl LocationCatalog {
    pub fn from_events(events: &[MobilityEvent]) -> Self {
        #[derive(Default)]
        struct Acc<'a> {
            lat: f64,
            lon: f64,
            n: u64,
            categories: BTreeMap<&'a str, u64>,
        }
        let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
        for e in events {
            let a = acc.entry(e.location_id.as_str()).or_default();
            a.lat += e.lat;
            a.lon += e.lon;
            a.n += 1;
            if let Some(c) = e.category.as_deref() {
                *a.categories.entry(c).or_default() += 1;
            }
        }
        let map = acc
            .into_iter()
            .map(|(loc, a)| {
                let category = a
                    .categories
                    .iter()
                    .fold(None::<(&str, u64)>, |best, (&c, &n)| match best {
                        Some((_, bn)) if bn >= n => best,
                        _ => Some((c, n)),
                    })
                    .map(|(c, _)| c.to_string());
                let info = LocationInfo {
                    mean_lat: a.lat / a.n as f64,
                    mean_lon: a.lon / a.n as f64,
                    category,
                    event_count: a.n,
                };
                (loc.to_string(), info)
            })
            .collect();
        Self(map)
    }

    pub fn get(&self, location: &str) -> Option<&LocationInfo> {
        self.0.get(location)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Extends agglomeration output to every catalogued location and attaches
/// categories.
pub fn complete_stats(
    mut stats: BTreeMap<String, LocationStats>,
    catalog: &LocationCatalog,
) -> BTreeMap<String, LocationStats> {
    for (loc, info) in &catalog.0 {
        let s = stats.entry(loc.clone()).or_insert_with(|| LocationStats::empty(loc));
        s.category = info.category.clone();
    }
    stats
}

/// Sets `resident_count` and `is_transient_location` on every location and
/// returns them ordered by `(Q desc, unique_visitors desc, location_id asc)`.
pub fn discover_transient_locations(
    stats: &BTreeMap<String, LocationStats>,
    bases: &BTreeMap<String, BaseAssignment>,
    min_unique_visitors: u64,
) -> Result<Vec<LocationStats>> {
    if min_unique_visitors < 1 {
        return Err(config("min unique visitors must be >= 1"));
    }
    let mut residents: BTreeMap<&str, u64> = BTreeMap::new();
    for b in bases.values() {
        *residents.entry(b.base_location.as_str()).or_default() += 1;
    }
    let mut out: Vec<LocationStats> = stats
        .values()
        .map(|s| {
            let mut s = s.clone();
            s.resident_count = residents.get(s.location_id.as_str()).copied().unwrap_or(0);
            s.is_transient_location =
                s.unique_visitors >= min_unique_visitors && s.unique_visitors > s.resident_count;
            s
        })
        .collect();
    out.sort_by(|a, b| {
        b.q.cmp(&a.q)
            .then(b.unique_visitors.cmp(&a.unique_visitors))
            .then_with(|| a.location_id.cmp(&b.location_id))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRank {
    pub rank: usize,
    pub category: String,
    pub total_q: u64,
    pub location_count: usize,
}

/// Sums Q per category over flagged locations, highest first; equal totals
/// order by category name.
pub fn rank_categories(flagged: &[LocationStats]) -> Vec<CategoryRank> {
    let mut totals: BTreeMap<&str, (u64, usize)> = BTreeMap::new();
    for s in flagged.iter().filter(|s| s.is_transient_location) {
        let key = s.category.as_deref().unwrap_or(UNCATEGORIZED);
        let t = totals.entry(key).or_default();
        t.0 += s.q;
        t.1 += 1;
    }
    let mut ranked: Vec<_> = totals.into_iter().collect();
    // Stable sort over name-ordered input keeps the name tie-break.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1 .0));
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (category, (total_q, location_count)))| CategoryRank {
            rank: i + 1,
            category: category.to_string(),
            total_q,
            location_count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stat(loc: &str, q: u64, uv: u64, cat: Option<&str>) -> LocationStats {
        LocationStats {
            q,
            unique_visitors: uv,
            category: cat.map(str::to_string),
            inbound_edges: q,
            ..LocationStats::empty(loc)
        }
    }

    fn bases(pairs: &[(&str, &str)]) -> BTreeMap<String, BaseAssignment> {
        pairs
            .iter()
            .map(|(p, b)| {
                (
                    p.to_string(),
                    BaseAssignment {
                        person_id: p.to_string(),
                        base_location: b.to_string(),
                        support: 1,
                        confidence: 1.0,
                        pinned: false,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn flags_location_with_many_visitors() {
        let stats: BTreeMap<_, _> = [("plaza".to_string(), stat("plaza", 7, 5, None))].into();
        let out = discover_transient_locations(&stats, &bases(&[]), 2).unwrap();
        assert!(out[0].is_transient_location);
    }

    #[test]
    fn residents_outnumbering_visitors_blocks_flag() {
        let stats: BTreeMap<_, _> = [("flats".to_string(), stat("flats", 1, 1, None))].into();
        let b = bases(&[("a", "flats"), ("b", "flats"), ("c", "flats")]);
        let out = discover_transient_locations(&stats, &b, 1).unwrap();
        assert_eq!(out[0].resident_count, 3);
        assert!(!out[0].is_transient_location);
    }

    #[test]
    fn zero_threshold_is_rejected() {
        assert!(discover_transient_locations(&BTreeMap::new(), &bases(&[]), 0).is_err());
    }

    #[test]
    fn ordering_is_q_then_visitors_then_id() {
        let stats: BTreeMap<_, _> = [
            stat("b", 5, 2, None),
            stat("a", 5, 2, None),
            stat("c", 5, 3, None),
            stat("d", 9, 1, None),
        ]
        .into_iter()
        .map(|s| (s.location_id.clone(), s))
        .collect();
        let out = discover_transient_locations(&stats, &bases(&[]), 1).unwrap();
        let ids: Vec<_> = out.iter().map(|s| s.location_id.as_str()).collect();
        assert_eq!(ids, ["d", "c", "a", "b"]);
    }

    #[test]
    fn categories_rank_by_total_q() {
        let mut flagged = vec![
            stat("p1", 3, 3, Some("Pub")),
            stat("p2", 4, 3, Some("Pub")),
            stat("park", 5, 3, Some("Park")),
        ];
        flagged.iter_mut().for_each(|s| s.is_transient_location = true);
        let r = rank_categories(&flagged);
        assert_eq!(
            r,
            vec![
                CategoryRank { rank: 1, category: "Pub".into(), total_q: 7, location_count: 2 },
                CategoryRank { rank: 2, category: "Park".into(), total_q: 5, location_count: 1 },
            ]
        );
        assert!(rank_categories(&[]).is_empty());
    }

    #[test]
    fn uncategorized_and_ties() {
        let mut flagged = vec![stat("x", 2, 2, None), stat("y", 2, 2, Some("Bar"))];
        flagged.iter_mut().for_each(|s| s.is_transient_location = true);
        let names: Vec<_> = rank_categories(&flagged).into_iter().map(|r| r.category).collect();
        assert_eq!(names, ["Bar", UNCATEGORIZED]);
    }

    #[test]
    fn catalog_picks_modal_category_and_mean_position() {
        let ev = |lat: f64, cat: Option<&str>| MobilityEvent {
            person_id: "p".into(),
            location_id: "v".into(),
            lat,
            lon: 2.0,
            timestamp: 0,
            category: cat.map(str::to_string),
        };
        let c = LocationCatalog::from_events(&[ev(1.0, Some("Pub")), ev(3.0, Some("Bar")), ev(2.0, Some("Pub"))]);
        let info = c.get("v").unwrap();
        assert_eq!(info.category.as_deref(), Some("Pub"));
        assert_eq!(info.mean_lat, 2.0);
        assert_eq!(info.event_count, 3);
    }

    fn arb_stats() -> impl Strategy<Value = Vec<(u64, u64, u8, u8)>> {
        prop::collection::vec((0u64..20, 0u64..10, 0u8..4, 0u8..5), 0..30)
    }

    proptest! {
        #[test]
        fn ranking_partitions_total_q(raw in arb_stats(), threshold in 1u64..6) {
            let stats: BTreeMap<String, LocationStats> = raw
                .iter()
                .enumerate()
                .map(|(i, &(extra, uv, cat, _))| {
                    let cat = ["Pub", "Park", "Cafe"].get(cat as usize).copied();
                    (format!("l{i}"), stat(&format!("l{i}"), uv + extra, uv, cat))
                })
                .collect();
            let b: BTreeMap<String, BaseAssignment> = raw
                .iter()
                .enumerate()
                .flat_map(|(i, &(_, _, _, res))| (0..res).map(move |r| (format!("r{i}_{r}"), format!("l{i}"))))
                .map(|(p, l)| (p.clone(), BaseAssignment { person_id: p, base_location: l, support: 1, confidence: 1.0, pinned: false }))
                .collect();
            let out = discover_transient_locations(&stats, &b, threshold).unwrap();
            let flagged: Vec<_> = out.iter().filter(|s| s.is_transient_location).cloned().collect();
            for s in &flagged {
                prop_assert!(s.unique_visitors >= threshold && s.unique_visitors > s.resident_count);
            }
            let ranks = rank_categories(&flagged);
            let total: u64 = ranks.iter().map(|r| r.total_q).sum();
            prop_assert_eq!(total, flagged.iter().map(|s| s.q).sum::<u64>());
            for (i, r) in ranks.iter().enumerate() {
                prop_assert_eq!(r.rank, i + 1);
            }
            for w in ranks.windows(2) {
                prop_assert!(w[0].total_q >= w[1].total_q);
            }
            // Raising the threshold never adds a flag.
            let stricter = discover_transient_locations(&stats, &b, threshold + 1).unwrap();
            for s in stricter.iter().filter(|s| s.is_transient_location) {
                prop_assert!(flagged.iter().any(|f| f.location_id == s.location_id));
            }
        }
    }
}
