//! Greedy forward-window map matching against a fixed route pattern.
//!
//! Each heartbeat is projected onto the segments in a window that starts at
//! the last valid match and extends `lookahead_segments` downstream. The
//! window is preferred; only when nothing in it lies within `max_offset_m`
//! does the search continue further downstream (this recovers from long
//! reporting gaps). A fix that fits an upstream segment better than anything
//! reachable downstream is kept but marked invalid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{project_onto_polyline, GeoError, GeoPoint, Projection};
use crate::ingest::{HeartbeatRecord, RoutePattern};

const TIE_EPS_M: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("no heartbeats to match")]
    Empty,
    #[error("heartbeats are not sorted by timestamp (record {0})")]
    Unsorted(usize),
    #[error("trip off-route: no point within {0} m of the pattern")]
    OffRoute(f64),
    #[error("segment {index}: {source}")]
    Geometry { index: usize, source: GeoError },
    #[error("invalid match config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub max_offset_m: f64,
    pub lookahead_segments: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        match_config_default()
    }
}

pub fn match_config_default() -> MatchConfig {
    MatchConfig {
        max_offset_m: 50.0,
        lookahead_segments: 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidReason {
    /// Best candidate is farther than `max_offset_m`.
    OffRoute,
    /// The fix fits an upstream segment better than any reachable one.
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPoint {
    /// Position in the input heartbeat list.
    pub index: usize,
    /// Epoch seconds of the fix.
    pub time: i64,
    pub raw: GeoPoint,
    pub matched: GeoPoint,
    pub segment_index: usize,
    pub along_fraction: f64,
    pub offset_m: f64,
    pub valid: bool,
    pub invalid_reason: Option<InvalidReason>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    segment: usize,
    proj: Projection,
}

/// Lowest offset over `range`; ties keep the earliest (closest to the
/// previous match) segment.
fn best_in(
    p: GeoPoint,
    pattern: &RoutePattern,
    range: std::ops::Range<usize>,
) -> Result<Option<Candidate>, MatchError> {
    let mut best: Option<Candidate> = None;
    for segment in range {
        let proj =
            project_onto_polyline(p, &pattern.segments[segment].polyline).map_err(|source| {
                MatchError::Geometry {
                    index: segment,
                    source,
                }
            })?;
        match best {
            Some(b) if proj.offset_m >= b.proj.offset_m - TIE_EPS_M => {}
            _ => best = Some(Candidate { segment, proj }),
        }
    }
    Ok(best)
}

/// Matches one trip's heartbeats, in time order, onto `pattern`.
pub fn match_trip(
    heartbeats: &[HeartbeatRecord],
    pattern: &RoutePattern,
    config: &MatchConfig,
) -> Result<Vec<MatchedPoint>, MatchError> {
    if heartbeats.is_empty() {
        return Err(MatchError::Empty);
    }
    if !(config.max_offset_m > 0.0) {
        return Err(MatchError::Config(format!(
            "max_offset_m must be positive, got {}",
            config.max_offset_m
        )));
    }
    if let Some(i) = heartbeats
        .windows(2)
        .position(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(MatchError::Unsorted(i + 1));
    }

    let n_seg = pattern.len();
    let mut prev: Option<usize> = None;
    let mut out = Vec::with_capacity(heartbeats.len());

    for (index, hb) in heartbeats.iter().enumerate() {
        let p = hb.position();
        let (window_start, window_end) = match prev {
            None => (0, n_seg),
            Some(s) => (s, (s + config.lookahead_segments + 1).min(n_seg)),
        };
        let window = best_in(p, pattern, window_start..window_end)?
            .expect("window holds at least one segment");
        let within = |c: &Candidate| c.proj.offset_m <= config.max_offset_m;

        let reachable = if within(&window) {
            Some(window)
        } else {
            best_in(p, pattern, window_end..n_seg)?.filter(within)
        };
        let upstream = best_in(p, pattern, 0..window_start)?.filter(within);

        let (chosen, reason) = match (reachable, upstream) {
            (Some(r), Some(u)) if u.proj.offset_m < r.proj.offset_m - TIE_EPS_M => {
                (u, Some(InvalidReason::Backward))
            }
            (Some(r), _) => (r, None),
            (None, Some(u)) => (u, Some(InvalidReason::Backward)),
            (None, None) => (window, Some(InvalidReason::OffRoute)),
        };
        if reason.is_none() {
            prev = Some(chosen.segment);
        }
        out.push(MatchedPoint {
            index,
            time: hb.timestamp,
            raw: p,
            matched: chosen.proj.snapped,
            segment_index: chosen.segment,
            along_fraction: chosen.proj.along_fraction,
            offset_m: chosen.proj.offset_m,
            valid: reason.is_none(),
            invalid_reason: reason,
        });
    }

    if prev.is_none() {
        return Err(MatchError::OffRoute(config.max_offset_m));
    }
    Ok(out)
}
