//! Reconstruction of continuous transit vehicle trajectories from timestamped
//! GPS heartbeat records.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`ingest`] parses heartbeats, route patterns and AVL door events.
//! 2. [`mapmatch`] snaps heartbeats onto the route with a forward-progress rule.
//! 3. [`tripframe`] turns matched points into time-into-trip and
//!    distance-into-trip vectors and repairs small backward jitter.
//! 4. [`smoothing`] fits LSEG, PCHIP, LOCREG and LOCREG-PCHIP trajectories
//!    and evaluates position, speed and acceleration.
//! 5. [`validation`] scores trajectories against door-open intervals and
//!    acceleration plausibility bounds.
//!
//! [`simulator`] generates synthetic trips with known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geo;
pub mod ingest;
pub mod mapmatch;
pub mod simulator;
pub mod smoothing;
pub mod tripframe;
pub mod units;
pub mod validation;

pub use geo::{haversine_m, project_onto_polyline, GeoPoint, Projection};
pub use ingest::{AvlDoorEvent, HeartbeatRecord, RoutePattern, RouteSegment};
pub use mapmatch::{match_config_default, match_trip, MatchConfig, MatchedPoint};
pub use smoothing::{
    fit_locreg, fit_locreg_pchip, fit_lseg, fit_pchip, Algorithm, LocregConfig, Trajectory,
};
pub use tripframe::{build_series, TimeDistanceSeries};
