//! Brute-force reference evaluation of the model for small instances.
//!
//! Every indicator term `(person, step s, from j, to k)` is materialized over
//! the person's location set and summed directly. Ping-pong removal, dwell
//! accounting and agglomeration are re-derived here from the raw events; no
//! code is shared with [`crate::model`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::types::MobilityEvent;

pub const MAX_PERSONS: usize = 50;
pub const MAX_EVENTS_PER_PERSON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub eta: usize,
    pub gamma: usize,
    #[serde(rename = "W")]
    pub w: f64,
    pub theta_seconds: i64,
    /// Q per location, only locations with Q > 0.
    pub q: BTreeMap<String, u64>,
    /// M per person.
    pub m: BTreeMap<String, f64>,
}

/// One materialized indicator term equal to 1.
#[derive(Debug, Clone, Copy)]
struct Term<'a> {
    step: usize,
    from: &'a str,
    to: &'a str,
}

pub fn evaluate(
    events: &[MobilityEvent],
    bases: &BTreeMap<String, String>,
    params: &ModelParams,
) -> Result<OracleSummary> {
    let mut people: BTreeMap<&str, Vec<&MobilityEvent>> = BTreeMap::new();
    for e in events {
        people.entry(e.person_id.as_str()).or_default().push(e);
    }
    if people.len() > MAX_PERSONS {
        return Err(Error::OracleTooLarge(format!(
            "{} persons exceeds the limit of {MAX_PERSONS}",
            people.len()
        )));
    }
    if let Some((p, evs)) = people.iter().find(|(_, v)| v.len() > MAX_EVENTS_PER_PERSON) {
        return Err(Error::OracleTooLarge(format!(
            "person {p} has {} events, limit is {MAX_EVENTS_PER_PERSON}",
            evs.len()
        )));
    }

    let all_locations: BTreeSet<&str> = events.iter().map(|e| e.location_id.as_str()).collect();
    let mut kept_terms: BTreeMap<&str, Vec<Term>> = BTreeMap::new();
    let mut m = BTreeMap::new();
    let mut eta = 0;
    let mut theta = 0i64;
    let mut w = 0.0;

    for (&person, evs) in people.iter_mut() {
        evs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.location_id.cmp(&b.location_id)));
        let base = bases.get(person).map(String::as_str).unwrap_or("");
        let locs: BTreeSet<&str> = evs.iter().map(|e| e.location_id.as_str()).collect();

        let mut terms = Vec::new();
        for s in 1..evs.len() {
            for &j in &locs {
                for &k in &locs {
                    if j != k && evs[s - 1].location_id == j && evs[s].location_id == k {
                        terms.push(Term { step: s, from: j, to: k });
                    }
                }
            }
        }

        // Pair removal: from the cursor, look for the first adjacent pair of
        // terms that reverse each other within the window.
        let mut removed = vec![false; terms.len()];
        if params.pingpong_window > 0 {
            let mut cursor = 0;
            while let Some(i) = (cursor..terms.len().saturating_sub(1)).find(|&i| {
                let (a, b) = (terms[i], terms[i + 1]);
                let span = evs[b.step].timestamp - evs[a.step - 1].timestamp;
                a.from == b.to && a.to == b.from && span <= params.pingpong_window
            }) {
                removed[i] = true;
                removed[i + 1] = true;
                cursor = i + 2;
            }
        }

        // Events at the interior location of a removed pair are dropped.
        let mut dropped = vec![false; evs.len()];
        let mut i = 0;
        while i < terms.len() {
            if removed[i] {
                for d in dropped.iter_mut().take(terms[i + 1].step).skip(terms[i].step) {
                    *d = true;
                }
                i += 2;
            } else {
                i += 1;
            }
        }

        let kept: Vec<Term> = terms.iter().zip(&removed).filter(|(_, r)| !**r).map(|(t, _)| *t).collect();
        let mi = params.beta * kept.len() as f64;
        w += mi;
        m.insert(person.to_string(), mi);

        let surviving: Vec<&MobilityEvent> =
            evs.iter().zip(&dropped).filter(|(_, d)| !**d).map(|(e, _)| *e).collect();
        if !kept.is_empty() || surviving.iter().any(|e| e.location_id != base) {
            eta += 1;
        }

        let cap = |secs: i64| params.max_dwell_cap.map_or(secs, |c| secs.min(c));
        let mut stay: Option<(&str, i64)> = None;
        for e in &surviving {
            match stay {
                Some((loc, _)) if loc == e.location_id => {}
                Some((loc, arrived)) => {
                    if loc != base {
                        theta += cap(e.timestamp - arrived);
                    }
                    stay = Some((&e.location_id, e.timestamp));
                }
                None => stay = Some((&e.location_id, e.timestamp)),
            }
        }
        if let Some((loc, arrived)) = stay {
            if loc != base {
                theta += cap((params.observation_window.end - arrived).max(0));
            }
        }

        kept_terms.insert(person, kept);
    }

    let mut q = BTreeMap::new();
    for &k in &all_locations {
        let mut total = 0u64;
        for (person, terms) in &kept_terms {
            let base = bases.get(*person).map(String::as_str).unwrap_or("");
            total += terms.iter().filter(|t| t.to == k && t.from != k && k != base).count() as u64;
        }
        if total > 0 {
            q.insert(k.to_string(), total);
        }
    }

    Ok(OracleSummary {
        n: people.len(),
        eta,
        gamma: all_locations.len(),
        w,
        theta_seconds: theta,
        q,
        m,
    })
}
