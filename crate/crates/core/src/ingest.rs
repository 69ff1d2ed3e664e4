//! Parsing, validation, deduplication and ordering of raw mobility records.
//!
//! Two input schemas are accepted:
//!
//! - JSONL, one object per line:
//!   `{"user": str, "lat": num, "lon": num, "ts": RFC3339 | epoch, "venue"?: str, "category"?: str}`
//! - CSV with header `user,lat,lon,ts,venue,category` (venue and category may be empty).
//!
//! Bad records never abort a parse; they are reported as [`Rejection`]s with
//! their 1-based line number. Blank lines are skipped and not counted.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geo;
use crate::types::{parse_timestamp, MobilityEvent, ObservationWindow};

pub const CSV_HEADER: [&str; 6] = ["user", "lat", "lon", "ts", "venue", "category"];

pub const REASON_DUPLICATE: &str = "duplicate";
pub const REASON_OUT_OF_WINDOW: &str = "out of window";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(config(format!("unknown input format `{other}`"))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Records outside this window are rejected with "out of window".
    pub window: Option<ObservationWindow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Accepted events in canonical order plus the audit trail of rejected lines.
///
/// Events are sorted by `(person_id, timestamp, location_id)`; no two share the
/// same `(person_id, location_id, timestamp)`.
#[derive(Debug, Clone, Default)]
pub struct EventBatch {
    pub events: Vec<MobilityEvent>,
    pub source_count: usize,
    pub rejected: Vec<Rejection>,
    /// Source line of each accepted event, parallel to `events`.
    lines: Vec<usize>,
}

impl EventBatch {
    pub fn accepted_count(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Per-person event slices, in person_id order.
    pub fn persons(&self) -> impl Iterator<Item = (&str, &[MobilityEvent])> {
        self.events
            .chunk_by(|a, b| a.person_id == b.person_id)
            .map(|chunk| (chunk[0].person_id.as_str(), chunk))
    }

    pub fn person_slices(&self) -> Vec<(&str, &[MobilityEvent])> {
        self.persons().collect()
    }

    pub fn source_line(&self, index: usize) -> usize {
        self.lines[index]
    }

    /// Canonical JSONL rendering of the accepted events. Two batches holding
    /// the same events render to identical bytes.
    pub fn write_events_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_rejected_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["line", "reason"])?;
        for r in &self.rejected {
            w.write_record([r.line.to_string(), r.reason.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Concatenates batches parsed from separate sources.
    pub fn merge(batches: Vec<EventBatch>) -> EventBatch {
        let mut candidates = Vec::new();
        let mut rejected = Vec::new();
        let mut source_count = 0;
        for b in batches {
            source_count += b.source_count;
            rejected.extend(b.rejected);
            candidates.extend(b.lines.into_iter().zip(b.events));
        }
        finalize(candidates, rejected, source_count)
    }
}

/// Parses one input stream. Line numbers in rejections are 1-based.
pub fn parse_events<R: Read>(
    reader: R,
    format: InputFormat,
    options: &IngestOptions,
) -> Result<EventBatch> {
    parse_events_at(reader, format, options, 0)
}

/// As [`parse_events`], with reported line numbers shifted by `line_offset`
/// so that several concatenated sources keep distinct numbering.
pub fn parse_events_at<R: Read>(
    mut reader: R,
    format: InputFormat,
    options: &IngestOptions,
    line_offset: usize,
) -> Result<EventBatch> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    })?;
    let parsed = match format {
        InputFormat::Jsonl => parse_jsonl(&text, options),
        InputFormat::Csv => parse_csv(&text, options)?,
    };

    let source_count = parsed.len();
    let mut candidates = Vec::with_capacity(source_count);
    let mut rejected = Vec::new();
    for (line, outcome) in parsed {
        let line = line + line_offset;
        match outcome {
            Ok(event) => candidates.push((line, event)),
            Err(reason) => rejected.push(Rejection { line, reason }),
        }
    }
    Ok(finalize(candidates, rejected, source_count))
}

/// Total number of lines in `text`, for computing the next source's offset.
pub fn line_count(text: &str) -> usize {
    text.lines().count()
}

/// Fills missing location ids with the grid-cell token of the event's
/// coordinates and restores canonical order. Events that collapse onto an
/// existing `(person, location, timestamp)` are moved to `rejected`.
pub fn canonicalize(batch: EventBatch, cell_size: f64) -> Result<EventBatch> {
    geo::check_cell_size(cell_size)?;
    let EventBatch { events, source_count, rejected, lines } = batch;
    let candidates = lines
        .into_iter()
        .zip(events)
        .map(|(line, mut e)| {
            if e.location_id.is_empty() {
                e.location_id = geo::cell_token(e.lat, e.lon, cell_size);
            }
            (line, e)
        })
        .collect();
    Ok(finalize(candidates, rejected, source_count))
}

fn finalize(
    mut candidates: Vec<(usize, MobilityEvent)>,
    mut rejected: Vec<Rejection>,
    source_count: usize,
) -> EventBatch {
    candidates.par_sort_unstable_by(|(la, a), (lb, b)| a.canonical_cmp(b).then(la.cmp(lb)));

    let mut events: Vec<MobilityEvent> = Vec::with_capacity(candidates.len());
    let mut lines = Vec::with_capacity(candidates.len());
    for (line, e) in candidates {
        match events.last() {
            Some(prev) if prev.same_sighting(&e) => rejected.push(Rejection {
                line,
                reason: REASON_DUPLICATE.to_string(),
            }),
            _ => {
                events.push(e);
                lines.push(line);
            }
        }
    }
    rejected.sort_by(|a, b| a.line.cmp(&b.line).then_with(|| a.reason.cmp(&b.reason)));
    EventBatch { events, source_count, rejected, lines }
}

type Parsed = (usize, std::result::Result<MobilityEvent, String>);

#[derive(Deserialize)]
struct JsonRecord {
    user: String,
    lat: f64,
    lon: f64,
    ts: JsonTimestamp,
    #[serde(default)]
    venue: Option<String>,
    #[serde(default)]
    category: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonTimestamp {
    Epoch(i64),
    Text(String),
}

fn parse_jsonl(text: &str, options: &IngestOptions) -> Vec<Parsed> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    lines
        .into_par_iter()
        .map(|(line, raw)| {
            let outcome = serde_json::from_str::<JsonRecord>(raw)
                .map_err(|e| format!("malformed record: {e}"))
                .and_then(|r| {
                    let ts = match r.ts {
                        JsonTimestamp::Epoch(s) => Some(s),
                        JsonTimestamp::Text(s) => parse_timestamp(&s),
                    };
                    validate(r.user, r.lat, r.lon, ts, r.venue, r.category, options)
                });
            (line, outcome)
        })
        .collect()
}

fn parse_csv(text: &str, options: &IngestOptions) -> Result<Vec<Parsed>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = ["user", "lat", "lon", "ts"];
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = column(name)
            .ok_or_else(|| Error::Schema(format!("csv header lacks column `{name}`")))?;
    }
    let venue_idx = column("venue");
    let category_idx = column("category");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let opt = |i: Option<usize>| i.map(field).filter(|s| !s.is_empty()).map(str::to_string);
        let outcome = match (field(idx[1]).parse::<f64>(), field(idx[2]).parse::<f64>()) {
            (Err(_), _) => Err("lat not a number".to_string()),
            (_, Err(_)) => Err("lon not a number".to_string()),
            (Ok(lat), Ok(lon)) => validate(
                field(idx[0]).to_string(),
                lat,
                lon,
                parse_timestamp(field(idx[3])),
                opt(venue_idx),
                opt(category_idx),
                options,
            ),
        };
        out.push((line, outcome));
    }
    Ok(out)
}

fn validate(
    user: String,
    lat: f64,
    lon: f64,
    ts: Option<i64>,
    venue: Option<String>,
    category: Option<String>,
    options: &IngestOptions,
) -> std::result::Result<MobilityEvent, String> {
    let user = user.trim();
    if user.is_empty() {
        return Err("empty user".into());
    }
    if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
        return Err("lat out of range".into());
    }
    if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
        return Err("lon out of range".into());
    }
    let timestamp = ts.ok_or_else(|| "invalid timestamp".to_string())?;
    if let Some(w) = options.window {
        if !w.contains(timestamp) {
            return Err(REASON_OUT_OF_WINDOW.into());
        }
    }
    let clean = |s: Option<String>| {
        s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
    };
    Ok(MobilityEvent {
        person_id: user.to_string(),
        location_id: clean(venue).unwrap_or_default(),
        lat,
        lon,
        timestamp,
        category: clean(category),
    })
}
