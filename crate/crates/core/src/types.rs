//! Shared domain types: events, time windows and time parsing helpers.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// One timestamped sighting of a person at a location.
///
/// `location_id` is empty for coordinate-only records until
/// [`crate::ingest::canonicalize`] assigns a grid-cell token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityEvent {
    pub person_id: String,
    pub location_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: Timestamp,
    pub category: Option<String>,
}

impl MobilityEvent {
    /// Total order used for canonical batches: person, time, location, then
    /// the remaining payload so that exact duplicates are adjacent.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.person_id
            .cmp(&other.person_id)
            .then(self.timestamp.cmp(&other.timestamp))
            .then_with(|| self.location_id.cmp(&other.location_id))
            .then_with(|| self.lat.total_cmp(&other.lat))
            .then_with(|| self.lon.total_cmp(&other.lon))
            .then_with(|| self.category.cmp(&other.category))
    }

    /// Identity used for deduplication: (person, location, timestamp). Records
    /// without a location fall back to their exact coordinates.
    pub fn same_sighting(&self, other: &Self) -> bool {
        self.person_id == other.person_id
            && self.timestamp == other.timestamp
            && self.location_id == other.location_id
            && (!self.location_id.is_empty()
                || (self.lat.to_bits() == other.lat.to_bits()
                    && self.lon.to_bits() == other.lon.to_bits()))
    }
}

/// Closed observation interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl ObservationWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if end < start {
            return Err(config(format!(
                "observation window end {end} precedes start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts <= self.end
    }

    pub fn length(&self) -> i64 {
        self.end - self.start
    }

    /// Smallest window covering every event, or `None` for an empty slice.
    pub fn covering(events: &[MobilityEvent]) -> Option<Self> {
        let start = events.iter().map(|e| e.timestamp).min()?;
        let end = events.iter().map(|e| e.timestamp).max()?;
        Some(Self { start, end })
    }
}

/// Half-open range of UTC hours `[start_hour, end_hour)`, wrapping past
/// midnight when `start_hour > end_hour`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NightWindow {
    pub start_hour: u8,
    pub end_hour: u8,
}

impl NightWindow {
    pub fn new(start_hour: u8, end_hour: u8) -> Result<Self> {
        if start_hour > 23 || end_hour > 23 {
            return Err(config("night window hours must be in 0..=23"));
        }
        if start_hour == end_hour {
            return Err(config("night window must not be empty"));
        }
        Ok(Self { start_hour, end_hour })
    }

    pub fn contains_hour(&self, hour: u8) -> bool {
        if self.start_hour < self.end_hour {
            self.start_hour <= hour && hour < self.end_hour
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.contains_hour(hour_of_day(ts))
    }
}

impl Default for NightWindow {
    fn default() -> Self {
        Self { start_hour: 21, end_hour: 6 }
    }
}

impl FromStr for NightWindow {
    type Err = Error;

    /// Parses `HH:HH`, e.g. `21:06`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| config(format!("night window `{s}` is not HH:HH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u8>()
                .map_err(|_| config(format!("night window `{s}` is not HH:HH")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for NightWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.start_hour, self.end_hour)
    }
}

pub fn hour_of_day(ts: Timestamp) -> u8 {
    (ts.rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as u8
}

/// Parses an RFC 3339 instant or integer epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    DateTime::parse_from_rfc3339(s).ok().map(|d| d.timestamp())
}

pub fn format_timestamp(ts: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}
