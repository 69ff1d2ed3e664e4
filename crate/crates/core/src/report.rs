//! CSV and GeoJSON renderings of pipeline results.

use std::collections::BTreeMap;
use std::io::Write;

use serde_json::{json, Value};

use crate::base::BaseAssignment;
use crate::discovery::{CategoryRank, LocationCatalog};
use crate::error::Result;
use crate::geo;
use crate::grid::CellDiff;
use crate::model::{LocationStats, PersonProfile};

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// `user,base,raw_edges,suppressed_edges,M,is_transient`
pub fn write_profiles_csv<W: Write>(profiles: &[PersonProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "base", "raw_edges", "suppressed_edges", "M", "is_transient"])?;
    for p in profiles {
        w.write_record([
            p.person_id.clone(),
            p.base_location.clone(),
            p.raw_edge_count.to_string(),
            p.suppressed_edge_count.to_string(),
            p.movement_profile.to_string(),
            p.is_transient.to_string(),
        ])?;
    }
    finish(w)
}

/// `location,Q,unique_visitors,category`, in location id order.
pub fn write_location_stats_csv<W: Write>(locations: &[LocationStats], out: W) -> Result<()> {
    let mut sorted: Vec<&LocationStats> = locations.iter().collect();
    sorted.sort_by(|a, b| a.location_id.cmp(&b.location_id));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["location", "Q", "unique_visitors", "category"])?;
    for s in sorted {
        w.write_record([
            s.location_id.as_str(),
            &s.q.to_string(),
            &s.unique_visitors.to_string(),
            s.category.as_deref().unwrap_or(""),
        ])?;
    }
    finish(w)
}

/// `location,Q,unique_visitors,resident_count,category,is_transient`, ranked.
pub fn write_transient_locations_csv<W: Write>(locations: &[LocationStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["location", "Q", "unique_visitors", "resident_count", "category", "is_transient"])?;
    for s in locations {
        w.write_record([
            s.location_id.as_str(),
            &s.q.to_string(),
            &s.unique_visitors.to_string(),
            &s.resident_count.to_string(),
            s.category.as_deref().unwrap_or(""),
            &s.is_transient_location.to_string(),
        ])?;
    }
    finish(w)
}

/// `rank,category,total_Q,location_count`
pub fn write_category_ranking_csv<W: Write>(ranks: &[CategoryRank], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "category", "total_Q", "location_count"])?;
    for r in ranks {
        w.write_record([r.rank.to_string(), r.category.clone(), r.total_q.to_string(), r.location_count.to_string()])?;
    }
    finish(w)
}

/// `row,col,transient_W,transient_persons,census_pop,flagged`
pub fn write_grid_diff_csv<W: Write>(diff: &[CellDiff], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "transient_W", "transient_persons", "census_pop", "flagged"])?;
    for d in diff {
        w.write_record([
            d.row.to_string(),
            d.col.to_string(),
            d.transient_w.to_string(),
            d.transient_persons.to_string(),
            d.census_pop.map(|p| p.to_string()).unwrap_or_default(),
            d.flagged.to_string(),
        ])?;
    }
    finish(w)
}

/// `user,base_location,support,confidence,pinned`; readable as a base override file.
pub fn write_bases_csv<W: Write>(bases: &BTreeMap<String, BaseAssignment>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "base_location", "support", "confidence", "pinned"])?;
    for b in bases.values() {
        w.write_record([
            b.person_id.clone(),
            b.base_location.clone(),
            b.support.to_string(),
            b.confidence.to_string(),
            b.pinned.to_string(),
        ])?;
    }
    finish(w)
}

/// Point features at the mean sighting position of each flagged location.
pub fn transient_locations_geojson(locations: &[LocationStats], catalog: &LocationCatalog, beta: f64) -> Value {
    let features: Vec<Value> = locations
        .iter()
        .filter(|s| s.is_transient_location)
        .filter_map(|s| {
            let info = catalog.get(&s.location_id)?;
            Some(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [info.mean_lon, info.mean_lat] },
                "properties": {
                    "location": s.location_id,
                    "Q": s.q,
                    "unique_visitors": s.unique_visitors,
                    "resident_count": s.resident_count,
                    "category": s.category,
                    "is_transient": s.is_transient_location,
                },
            }))
        })
        .collect();
    json!({ "type": "FeatureCollection", "properties": { "beta": beta }, "features": features })
}

/// Polygon features for census-flagged cells.
pub fn flagged_cells_geojson(diff: &[CellDiff], cell_size: f64, beta: f64) -> Value {
    let features: Vec<Value> = diff
        .iter()
        .filter(|d| d.flagged)
        .map(|d| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [geo::cell_ring(d.row, d.col, cell_size)] },
                "properties": {
                    "row": d.row,
                    "col": d.col,
                    "transient_W": d.transient_w,
                    "transient_persons": d.transient_persons,
                    "census_pop": d.census_pop,
                },
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "properties": { "beta": beta, "cell_size": cell_size },
        "features": features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LocationStats;

    #[test]
    fn grid_csv_leaves_absent_census_empty() {
        let diff = [CellDiff { row: -1, col: 2, transient_w: 2.5, transient_persons: 2, census_pop: None, flagged: true }];
        let mut buf = Vec::new();
        write_grid_diff_csv(&diff, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row,col,transient_W,transient_persons,census_pop,flagged\n-1,2,2.5,2,,true\n"
        );
    }

    #[test]
    fn location_csv_sorted_by_id() {
        let locs = [
            LocationStats { q: 3, ..LocationStats::empty("b") },
            LocationStats { category: Some("Pub".into()), ..LocationStats::empty("a") },
        ];
        let mut buf = Vec::new();
        write_location_stats_csv(&locs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "location,Q,unique_visitors,category\na,0,0,Pub\nb,3,0,\n");
    }

    #[test]
    fn cell_polygon_is_closed() {
        let diff = [CellDiff { row: 0, col: 0, transient_w: 1.0, transient_persons: 1, census_pop: None, flagged: true }];
        let g = flagged_cells_geojson(&diff, 0.5, 1.0);
        let ring = &g["features"][0]["geometry"]["coordinates"][0];
        assert_eq!(ring[0], ring[4]);
        assert_eq!(ring[2], json!([0.5, 0.5]));
    }
}
