//! Spatial binning of arrivals and comparison against a census baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geo;
use crate::model::MovementEdge;

pub type CellKey = (i64, i64);

/// Relative tolerance when matching a census file's declared cell size.
const CELL_SIZE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: i64,
    pub col: i64,
    /// Suppressed edges arriving in this cell.
    pub arrivals: u64,
    /// `beta * arrivals`.
    pub transient_w: f64,
    pub transient_persons: u64,
}

/// Bins every edge by its arrival coordinates.
pub fn grid_aggregate(
    edges: &[MovementEdge],
    beta: f64,
    cell_size: f64,
) -> Result<BTreeMap<CellKey, GridCell>> {
    geo::check_cell_size(cell_size)?;
    let mut counts: BTreeMap<CellKey, (u64, BTreeSet<&str>)> = BTreeMap::new();
    for e in edges {
        let key = geo::cell_of(e.arrive_lat, e.arrive_lon, cell_size);
        let c = counts.entry(key).or_default();
        c.0 += 1;
        c.1.insert(&e.person_id);
    }
    Ok(counts
        .into_iter()
        .map(|((row, col), (arrivals, persons))| {
            let cell = GridCell {
                row,
                col,
                arrivals,
                transient_w: beta * arrivals as f64,
                transient_persons: persons.len() as u64,
            };
            ((row, col), cell)
        })
        .collect())
}

/// Census population on the same floor grid.
///
/// File format: a first line `#cell_size=<degrees>`, then CSV
/// `row,col,population`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensusBaseline {
    pub cell_size: f64,
    pub cells: BTreeMap<CellKey, f64>,
}

impl CensusBaseline {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut buf = BufReader::new(reader);
        let mut first = String::new();
        buf.read_line(&mut first)?;
        let cell_size = first
            .trim()
            .strip_prefix("#cell_size=")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Schema("census file must start with `#cell_size=<degrees>`".into()))?;
        geo::check_cell_size(cell_size)?;

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(buf);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["row", "col", "population"] {
            return Err(Error::Schema("census header must be `row,col,population`".into()));
        }
        let mut cells = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || Error::Schema(format!("bad census row at line {}", rec.position().map_or(0, |p| p.line() + 1)));
            let row: i64 = rec[0].parse().map_err(|_| bad())?;
            let col: i64 = rec[1].parse().map_err(|_| bad())?;
            let pop: f64 = rec[2].parse().map_err(|_| bad())?;
            if !(pop.is_finite() && pop >= 0.0) {
                return Err(bad());
            }
            *cells.entry((row, col)).or_insert(0.0) += pop;
        }
        Ok(Self { cell_size, cells })
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = format!("#cell_size={}\nrow,col,population\n", self.cell_size);
        for ((r, c), p) in &self.cells {
            s.push_str(&format!("{r},{c},{p}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiff {
    pub row: i64,
    pub col: i64,
    pub transient_w: f64,
    pub transient_persons: u64,
    pub census_pop: Option<f64>,
    pub flagged: bool,
}

/// Full diff over the union of grid and census cells. A cell is flagged when
/// it carries transient weight and its census population is missing or at
/// most `absent_threshold`.
pub fn census_diff(
    grid: &BTreeMap<CellKey, GridCell>,
    census: Option<&CensusBaseline>,
    cell_size: f64,
    absent_threshold: f64,
) -> Result<Vec<CellDiff>> {
    if !(absent_threshold.is_finite() && absent_threshold >= 0.0) {
        return Err(config("absent threshold must be a finite value >= 0"));
    }
    let empty = BTreeMap::new();
    let census_cells = match census {
        Some(c) => {
            if ((c.cell_size - cell_size) / cell_size).abs() > CELL_SIZE_RTOL {
                return Err(config(format!(
                    "census cell size {} does not match grid cell size {}",
                    c.cell_size, cell_size
                )));
            }
            &c.cells
        }
        None => &empty,
    };
    let keys: BTreeSet<CellKey> = grid.keys().chain(census_cells.keys()).copied().collect();
    Ok(keys
        .into_iter()
        .map(|key| {
            let (w, persons) = grid.get(&key).map_or((0.0, 0), |c| (c.transient_w, c.transient_persons));
            let census_pop = census_cells.get(&key).copied();
            let flagged = w > 0.0 && census_pop.is_none_or(|p| p <= absent_threshold);
            CellDiff { row: key.0, col: key.1, transient_w: w, transient_persons: persons, census_pop, flagged }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arrival(person: &str, lat: f64, lon: f64) -> MovementEdge {
        MovementEdge {
            person_id: person.into(),
            from_location: "a".into(),
            to_location: "b".into(),
            depart_ts: 0,
            arrive_ts: 1,
            arrive_lat: lat,
            arrive_lon: lon,
        }
    }

    #[test]
    fn counts_arrivals_per_cell() {
        let edges: Vec<_> = ["a", "b", "a", "c"].iter().map(|p| arrival(p, 0.01, 0.02)).collect();
        let g = grid_aggregate(&edges, 1.0, 0.05).unwrap();
        assert_eq!(g.len(), 1);
        let c = &g[&(0, 0)];
        assert_eq!((c.arrivals, c.transient_w, c.transient_persons), (4, 4.0, 3));
    }

    #[test]
    fn boundary_arrival_goes_to_upper_cell() {
        let g = grid_aggregate(&[arrival("a", 0.15, -0.15)], 1.0, 0.05).unwrap();
        assert!(g.contains_key(&(3, -3)));
    }

    fn census(cell: f64, rows: &[((i64, i64), f64)]) -> CensusBaseline {
        CensusBaseline { cell_size: cell, cells: rows.iter().copied().collect() }
    }

    #[test]
    fn flags_only_census_absent_cells() {
        let edges = vec![arrival("a", 0.01, 0.01), arrival("a", 0.06, 0.01)];
        let g = grid_aggregate(&edges, 1.0, 0.05).unwrap();
        let c = census(0.05, &[((0, 0), 10_000.0), ((5, 5), 3.0)]);
        let diff = census_diff(&g, Some(&c), 0.05, 0.0).unwrap();
        let flagged: Vec<_> = diff.iter().filter(|d| d.flagged).map(|d| (d.row, d.col)).collect();
        assert_eq!(flagged, [(1, 0)]);
        assert_eq!(diff.len(), 3);
        let none = census_diff(&g, None, 0.05, 0.0).unwrap();
        assert!(none.iter().all(|d| d.flagged));
    }

    #[test]
    fn mismatched_cell_size_is_fatal() {
        let g = BTreeMap::new();
        assert!(matches!(census_diff(&g, Some(&census(0.1, &[])), 0.05, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn census_file_round_trips() {
        let text = "#cell_size=0.05\nrow,col,population\n-678,3024,1200.5\n0,0,0\n";
        let c = CensusBaseline::from_reader(text.as_bytes()).unwrap();
        assert_eq!(c.cell_size, 0.05);
        assert_eq!(c.cells[&(-678, 3024)], 1200.5);
        assert_eq!(CensusBaseline::from_reader(c.to_csv_string().as_bytes()).unwrap(), c);
        assert!(CensusBaseline::from_reader("row,col,population\n".as_bytes()).is_err());
        assert!(CensusBaseline::from_reader("#cell_size=0.05\nr,c,p\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn cells_conserve_arrivals(points in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0u8..5), 0..200), beta in prop::sample::select(vec![0.5, 1.0])) {
            let edges: Vec<_> = points.iter().map(|&(lat, lon, p)| arrival(&format!("p{p}"), lat, lon)).collect();
            let g = grid_aggregate(&edges, beta, 0.1).unwrap();
            let total: u64 = g.values().map(|c| c.arrivals).sum();
            prop_assert_eq!(total as usize, edges.len());
            for c in g.values() {
                prop_assert_eq!(c.transient_w, beta * c.arrivals as f64);
            }
        }

        #[test]
        fn raising_threshold_keeps_absent_flags(
            counts in prop::collection::vec(1u64..5, 1..20),
            pops in prop::collection::vec(prop::option::of(0.0f64..100.0), 1..20),
            lo in 0.0f64..50.0, extra in 0.0f64..50.0,
        ) {
            let grid: BTreeMap<CellKey, GridCell> = counts.iter().enumerate().map(|(i, &n)| {
                ((i as i64, 0), GridCell { row: i as i64, col: 0, arrivals: n, transient_w: n as f64, transient_persons: 1 })
            }).collect();
            let cells = pops.iter().enumerate().filter_map(|(i, p)| p.map(|p| ((i as i64, 0), p))).collect();
            let c = CensusBaseline { cell_size: 0.1, cells };
            let a = census_diff(&grid, Some(&c), 0.1, lo).unwrap();
            let b = census_diff(&grid, Some(&c), 0.1, lo + extra).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(!x.flagged || y.flagged);
            }
        }
    }
}
