//! Floor-quantized lat/lon grid shared by canonicalization and census binning.

use crate::error::{config, Result};

/// Relative slack under which a quotient is snapped to the nearest integer, so
/// that a coordinate lying exactly on `k * cell_size` lands in cell `k` despite
/// binary rounding (0.15 / 0.05 evaluates to 2.9999999999999996).
const SNAP_EPS: f64 = 1e-9;

pub fn check_cell_size(cell_size: f64) -> Result<()> {
    if cell_size.is_finite() && cell_size > 0.0 {
        Ok(())
    } else {
        Err(config(format!("cell size must be positive, got {cell_size}")))
    }
}

/// `floor(value / cell_size)` with the lower edge inclusive.
pub fn cell_index(value: f64, cell_size: f64) -> i64 {
    let q = value / cell_size;
    let nearest = q.round();
    if (q - nearest).abs() <= SNAP_EPS * nearest.abs().max(1.0) {
        nearest as i64
    } else {
        q.floor() as i64
    }
}

/// `(row, col)` of the cell containing `(lat, lon)`.
pub fn cell_of(lat: f64, lon: f64, cell_size: f64) -> (i64, i64) {
    (cell_index(lat, cell_size), cell_index(lon, cell_size))
}

/// Location token for a coordinate-only record: `c:<row>:<col>`.
pub fn cell_token(lat: f64, lon: f64, cell_size: f64) -> String {
    let (row, col) = cell_of(lat, lon, cell_size);
    format!("c:{row}:{col}")
}

/// Corner ring `[lon, lat]` of a cell, closed, counter-clockwise.
pub fn cell_ring(row: i64, col: i64, cell_size: f64) -> [[f64; 2]; 5] {
    let lat0 = row as f64 * cell_size;
    let lat1 = (row + 1) as f64 * cell_size;
    let lon0 = col as f64 * cell_size;
    let lon1 = (col + 1) as f64 * cell_size;
    [[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]
}
