//! Conversion of matched points into time-into-trip and distance-into-trip
//! vectors, plus the cleaning needed before smoothing.

use serde::Serialize;
use thiserror::Error;

use crate::ingest::RoutePattern;
use crate::mapmatch::MatchedPoint;

/// Backward moves larger than this drop the point instead of clamping it.
pub const MAX_BACKWARD_JUMP_M: f64 = 100.0;

pub const MIN_SERIES_LEN: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("insufficient data: {0} usable points, need at least 3")]
    InsufficientData(usize),
    #[error("point {index} references segment {segment} outside the pattern ({len} segments)")]
    SegmentOutOfRange {
        index: usize,
        segment: usize,
        len: usize,
    },
    #[error("invalid series: {0}")]
    Invalid(String),
}

/// Cleaned discrete trajectory of one trip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDistanceSeries {
    t: Vec<f64>,
    d: Vec<f64>,
    origin_time: i64,
    origin_route_m: f64,
}

impl TimeDistanceSeries {
    /// Checks the invariants: equal lengths of at least 3, `t` strictly
    /// increasing from 0, `d` non-decreasing from 0.
    pub fn new(t: Vec<f64>, d: Vec<f64>, origin_time: i64) -> Result<Self, FrameError> {
        Self::with_origin(t, d, origin_time, 0.0)
    }

    /// Like [`TimeDistanceSeries::new`], also recording where the first point
    /// sits along the route.
    pub fn with_origin(
        t: Vec<f64>,
        d: Vec<f64>,
        origin_time: i64,
        origin_route_m: f64,
    ) -> Result<Self, FrameError> {
        if t.len() != d.len() {
            return Err(FrameError::Invalid(format!(
                "t has {} values, d has {}",
                t.len(),
                d.len()
            )));
        }
        if t.len() < MIN_SERIES_LEN {
            return Err(FrameError::InsufficientData(t.len()));
        }
        if t[0] != 0.0 || d[0] != 0.0 {
            return Err(FrameError::Invalid("series must start at (0, 0)".into()));
        }
        if t.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(FrameError::Invalid("non-finite value".into()));
        }
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FrameError::Invalid(format!(
                "t not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = d.windows(2).position(|w| w[1] < w[0]) {
            return Err(FrameError::Invalid(format!(
                "d decreases at index {}",
                i + 1
            )));
        }
        Ok(Self {
            t,
            d,
            origin_time,
            origin_route_m,
        })
    }

    /// Seconds into the trip.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Meters into the trip.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Epoch seconds of the first point.
    pub fn origin_time(&self) -> i64 {
        self.origin_time
    }

    /// Route distance of the first point, measured from the pattern start.
    pub fn origin_route_m(&self) -> f64 {
        self.origin_route_m
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

/// `t_i = S_i - S_1` over the valid points, in whole seconds. Equal
/// timestamps produce duplicate values; [`build_series`] resolves them.
pub fn time_into_trip(points: &[MatchedPoint]) -> Vec<f64> {
    let mut valid = points.iter().filter(|p| p.valid);
    let Some(first) = valid.next() else {
        return Vec::new();
    };
    std::iter::once(first)
        .chain(valid)
        .map(|p| (p.time - first.time) as f64)
        .collect()
}

fn route_position(
    p: &MatchedPoint,
    pattern: &RoutePattern,
    prefix: &[f64],
) -> Result<f64, FrameError> {
    let seg = pattern
        .segments
        .get(p.segment_index)
        .ok_or(FrameError::SegmentOutOfRange {
            index: p.index,
            segment: p.segment_index,
            len: pattern.len(),
        })?;
    Ok(prefix[p.segment_index] + seg.length_m * p.along_fraction)
}

fn segment_prefix(pattern: &RoutePattern) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(pattern.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for s in &pattern.segments {
        acc += s.length_m;
        prefix.push(acc);
    }
    prefix
}

/// Distance into trip of each valid point: the route position of the point
/// minus that of the first valid point.
pub fn distance_into_trip(
    points: &[MatchedPoint],
    pattern: &RoutePattern,
) -> Result<Vec<f64>, FrameError> {
    let prefix = segment_prefix(pattern);
    let positions = points
        .iter()
        .filter(|p| p.valid)
        .map(|p| route_position(p, pattern, &prefix))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(&origin) = positions.first() else {
        return Ok(Vec::new());
    };
    Ok(positions.into_iter().map(|x| x - origin).collect())
}

/// Summary of what cleaning did to the matched points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FrameReport {
    pub input_points: usize,
    pub invalid_dropped: usize,
    pub duplicates_dropped: usize,
    pub backward_jumps_dropped: usize,
    pub clamped: usize,
}

/// Builds the cleaned series from matched points.
///
/// Invalid points are dropped; among points sharing a timestamp the one
/// with the smallest offset survives (the earliest on ties); a distance
/// more than [`MAX_BACKWARD_JUMP_M`] below the running maximum drops the
/// point, a smaller regression is clamped up to the running maximum.
pub fn build_series(
    points: &[MatchedPoint],
    pattern: &RoutePattern,
) -> Result<TimeDistanceSeries, FrameError> {
    build_series_with_report(points, pattern).map(|(s, _)| s)
}

pub fn build_series_with_report(
    points: &[MatchedPoint],
    pattern: &RoutePattern,
) -> Result<(TimeDistanceSeries, FrameReport), FrameError> {
    let mut report = FrameReport {
        input_points: points.len(),
        ..FrameReport::default()
    };

    let valid: Vec<&MatchedPoint> = points.iter().filter(|p| p.valid).collect();
    report.invalid_dropped = points.len() - valid.len();

    let mut dedup: Vec<&MatchedPoint> = Vec::with_capacity(valid.len());
    for p in valid {
        match dedup.last_mut() {
            Some(last) if last.time == p.time => {
                report.duplicates_dropped += 1;
                if p.offset_m < last.offset_m {
                    *last = p;
                }
            }
            _ => dedup.push(p),
        }
    }

    let prefix = segment_prefix(pattern);
    let Some(first) = dedup.first() else {
        return Err(FrameError::InsufficientData(0));
    };
    let origin_time = first.time;
    let origin_route_m = route_position(first, pattern, &prefix)?;

    let mut t = Vec::with_capacity(dedup.len());
    let mut d = Vec::with_capacity(dedup.len());
    let mut running_max = 0.0f64;
    for p in &dedup {
        let raw = route_position(p, pattern, &prefix)? - origin_route_m;
        let dist = if t.is_empty() {
            0.0
        } else if raw < running_max - MAX_BACKWARD_JUMP_M {
            report.backward_jumps_dropped += 1;
            continue;
        } else if raw < running_max {
            report.clamped += 1;
            running_max
        } else {
            raw
        };
        running_max = running_max.max(dist);
        t.push((p.time - origin_time) as f64);
        d.push(dist);
    }

    if t.len() < MIN_SERIES_LEN {
        return Err(FrameError::InsufficientData(t.len()));
    }
    let series = TimeDistanceSeries::with_origin(t, d, origin_time, origin_route_m)?;
    Ok((series, report))
}
