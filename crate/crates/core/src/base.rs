//! Base (home) location inference.
//!
//! The base is the modal location among a person's night-time sightings, or
//! the overall modal location when no sighting falls in the night window.
//! Ties go to the location with the larger total run dwell, then to the
//! lexicographically smaller id.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventBatch;
use crate::types::{MobilityEvent, NightWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseAssignment {
    pub person_id: String,
    pub base_location: String,
    /// Events observed at the base location.
    pub support: usize,
    /// `support / total events of the person`.
    pub confidence: f64,
    /// True when pinned by an override file rather than inferred.
    #[serde(default)]
    pub pinned: bool,
}

#[derive(Default)]
struct Tally {
    night: usize,
    total: usize,
    dwell: i64,
}

/// Infers the base of one person's time-sorted event sequence.
pub fn infer_base(events: &[MobilityEvent], night: NightWindow) -> Result<BaseAssignment> {
    let first = events
        .first()
        .ok_or_else(|| Error::NoEvents(String::new()))?;

    let mut tally: BTreeMap<&str, Tally> = BTreeMap::new();
    for e in events {
        let t = tally.entry(e.location_id.as_str()).or_default();
        t.total += 1;
        if night.contains(e.timestamp) {
            t.night += 1;
        }
    }
    // Run dwell: first-to-last sighting of each maximal same-location run.
    for run in events.chunk_by(|a, b| a.location_id == b.location_id) {
        let span = run[run.len() - 1].timestamp - run[0].timestamp;
        if let Some(t) = tally.get_mut(run[0].location_id.as_str()) {
            t.dwell += span;
        }
    }

    let any_night = tally.values().any(|t| t.night > 0);
    let score = |t: &Tally| if any_night { t.night } else { t.total };
    // BTreeMap iterates ids ascending, so keeping the first maximum breaks the
    // final tie lexicographically.
    let mut best: Option<(&str, &Tally)> = None;
    for (loc, t) in &tally {
        let better = match best {
            None => true,
            Some((_, b)) => (score(t), t.dwell) > (score(b), b.dwell),
        };
        if better {
            best = Some((loc, t));
        }
    }
    let (base, t) = best.expect("non-empty tally");

    Ok(BaseAssignment {
        person_id: first.person_id.clone(),
        base_location: base.to_string(),
        support: t.total,
        confidence: t.total as f64 / events.len() as f64,
        pinned: false,
    })
}

/// Builds an assignment for a pinned base. The pinned location need not occur
/// in the sequence, in which case support and confidence are zero.
pub fn pinned_base(events: &[MobilityEvent], person_id: &str, base: &str) -> BaseAssignment {
    let support = events.iter().filter(|e| e.location_id == base).count();
    BaseAssignment {
        person_id: person_id.to_string(),
        base_location: base.to_string(),
        support,
        confidence: if events.is_empty() { 0.0 } else { support as f64 / events.len() as f64 },
        pinned: true,
    }
}

/// Person → base location pins read from CSV `user,base_location`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaseOverrides(pub HashMap<String, String>);

impl BaseOverrides {
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("base override csv lacks column `{name}`")))
        };
        let (user, base) = (col("user")?, col("base_location")?);
        let mut map = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let (u, b) = (rec.get(user).unwrap_or(""), rec.get(base).unwrap_or(""));
            if u.is_empty() || b.is_empty() {
                return Err(Error::Schema(format!(
                    "base override row {} has an empty field",
                    rec.position().map_or(0, |p| p.line())
                )));
            }
            map.insert(u.to_string(), b.to_string());
        }
        Ok(Self(map))
    }

    pub fn get(&self, person: &str) -> Option<&str> {
        self.0.get(person).map(String::as_str)
    }
}

/// Assigns a base to every person in the batch: pinned when the override map
/// has an entry, inferred otherwise.
pub fn assign_bases(
    batch: &EventBatch,
    night: NightWindow,
    overrides: Option<&BaseOverrides>,
) -> Result<BTreeMap<String, BaseAssignment>> {
    batch
        .person_slices()
        .into_par_iter()
        .map(|(person, events)| {
            let assignment = match overrides.and_then(|o| o.get(person)) {
                Some(base) => pinned_base(events, person, base),
                None => infer_base(events, night).map_err(|e| match e {
                    Error::NoEvents(_) => Error::NoEvents(person.to_string()),
                    other => other,
                })?,
            };
            Ok((person.to_string(), assignment))
        })
        .collect()
}

/// Projection of assignments to a plain person → base map.
pub fn base_map(assignments: &BTreeMap<String, BaseAssignment>) -> BTreeMap<String, String> {
    assignments
        .iter()
        .map(|(p, a)| (p.clone(), a.base_location.clone()))
        .collect()
}
