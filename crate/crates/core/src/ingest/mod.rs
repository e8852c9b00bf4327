//! Parsing and validation of the three input artifacts: heartbeat records,
//! route patterns and AVL door events.
//!
//! Row-oriented loaders never abort on a bad row. Each failing row lands in
//! [`LoadReport::rejects`] with its line number so that
//! `rows == rejects + accepted` holds for every load.

mod avl;
mod heartbeat;
mod route;
pub mod tables;
mod time;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub use avl::{load_avl_events, merge_door_events, write_avl_csv};
pub use heartbeat::{load_heartbeats, write_heartbeats_csv, write_heartbeats_jsonl};
pub use route::{load_route_pattern, write_route_geojson};
pub use time::{format_timestamp, parse_timestamp, ParsedTimestamp};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("route: {0}")]
    Route(#[from] RouteError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("invalid json: {0}")]
    Json(String),
    #[error("expected a GeoJSON FeatureCollection")]
    NotFeatureCollection,
    #[error("route has no segments")]
    Empty,
    #[error("feature {index}: geometry must be LineString, found {found}")]
    Geometry { index: usize, found: String },
    #[error("feature {index}: missing or invalid property `{name}`")]
    Property { index: usize, name: &'static str },
    #[error("feature {index}: {reason}")]
    Coordinates { index: usize, reason: String },
    #[error("non-contiguous sequence: expected {expected}, found {found}")]
    NonContiguousSequence { expected: u64, found: u64 },
    #[error(
        "length mismatch on segment `{segment_id}`: declared {declared_m} m, geometry {geodesic_m:.3} m"
    )]
    LengthMismatch {
        segment_id: String,
        declared_m: f64,
        geodesic_m: f64,
    },
    #[error("segment `{segment_id}`: {reason}")]
    Segment { segment_id: String, reason: String },
}

/// One timestamped GPS fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatRecord {
    pub trip_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl HeartbeatRecord {
    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// Door-open interval recorded by the AVL system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvlDoorEvent {
    pub trip_id: String,
    pub open_at: i64,
    pub close_at: i64,
    pub stop_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteSegment {
    pub segment_id: String,
    pub polyline: Vec<GeoPoint>,
    pub length_m: f64,
}

/// Ordered segments of a fixed route. Segment `b` is downstream of `a`
/// whenever `b > a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePattern {
    pub pattern_id: String,
    pub segments: Vec<RouteSegment>,
}

/// Declared segment lengths may differ from the polyline geometry by at most
/// this fraction.
pub const LENGTH_TOLERANCE: f64 = 0.005;

impl RouteSegment {
    /// Builds a segment whose length is measured from its geometry.
    pub fn from_polyline(segment_id: impl Into<String>, polyline: Vec<GeoPoint>) -> Self {
        let length_m = crate::geo::polyline_length_m(&polyline);
        Self {
            segment_id: segment_id.into(),
            polyline,
            length_m,
        }
    }

    fn validate(&self) -> Result<(), RouteError> {
        let err = |reason: String| RouteError::Segment {
            segment_id: self.segment_id.clone(),
            reason,
        };
        if self.polyline.len() < 2 {
            return Err(err(format!(
                "polyline has {} vertices, need at least 2",
                self.polyline.len()
            )));
        }
        for v in &self.polyline {
            GeoPoint::checked(v.lat, v.lon).map_err(|e| err(e.to_string()))?;
        }
        if !(self.length_m > 0.0) || !self.length_m.is_finite() {
            return Err(err(format!("length {} m is not positive", self.length_m)));
        }
        let geodesic = crate::geo::polyline_length_m(&self.polyline);
        if (self.length_m - geodesic).abs() > LENGTH_TOLERANCE * geodesic {
            return Err(RouteError::LengthMismatch {
                segment_id: self.segment_id.clone(),
                declared_m: self.length_m,
                geodesic_m: geodesic,
            });
        }
        Ok(())
    }
}

impl RoutePattern {
    pub fn new(
        pattern_id: impl Into<String>,
        segments: Vec<RouteSegment>,
    ) -> Result<Self, RouteError> {
        if segments.is_empty() {
            return Err(RouteError::Empty);
        }
        for s in &segments {
            s.validate()?;
        }
        Ok(Self {
            pattern_id: pattern_id.into(),
            segments,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_length_m(&self) -> f64 {
        self.segments.iter().map(|s| s.length_m).sum()
    }

    /// Route distance at the start of segment `index`.
    pub fn segment_start_m(&self, index: usize) -> f64 {
        self.segments[..index].iter().map(|s| s.length_m).sum()
    }

    pub fn segment_index(&self, segment_id: &str) -> Option<usize> {
        self.segments
            .iter()
            .position(|s| s.segment_id == segment_id)
    }
}

/// A row that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Outcome of a row-oriented load.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    /// Data rows read, blank lines excluded.
    pub rows: usize,
    /// Timestamps whose fractional seconds were dropped.
    pub truncated_subsecond: usize,
    /// Accepted rows absorbed into another record by interval merging.
    pub merged: usize,
}

impl<T> LoadReport<T> {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            rejects: Vec::new(),
            rows: 0,
            truncated_subsecond: 0,
            merged: 0,
        }
    }

    pub fn accepted_rows(&self) -> usize {
        self.records.len() + self.merged
    }

    fn reject(&mut self, line: u64, reason: impl Into<String>) {
        self.rejects.push(Reject {
            line,
            reason: reason.into(),
        });
    }
}

/// Input formats accepted for heartbeat data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeartbeatFormat {
    Csv,
    JsonLines,
}

/// Looks up required header columns, failing on the first one absent.
fn column_indices<const N: usize>(
    headers: &csv::StringRecord,
    names: [&str; N],
) -> Result<[usize; N], IngestError> {
    let mut out = [0usize; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }
    Ok(out)
}

fn csv_reader<R: std::io::Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}
