//! Scoring of fitted trajectories.
//!
//! * Speed against AVL door-open intervals: a stopped bus should show a speed
//!   at or below a small threshold while its doors are open.
//! * Acceleration plausibility: the share of samples outside
//!   `[-5.3, 3.7]` mphps.
//! * The ideal-property scorecard (MON, CUB, DIFF, ERR), measured on the
//!   fitted trajectories.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::AvlDoorEvent;
use crate::smoothing::{fit, sample_grid, Algorithm, FitError, LocregConfig, Trajectory};
use crate::tripframe::TimeDistanceSeries;
use crate::units::{mph_to_mps, mphps_to_mps2};

pub const DEFAULT_THRESHOLDS_MPH: [f64; 3] = [0.0, 3.0, 5.0];
pub const MAX_ACCEL_MPHPS: f64 = 3.7;
pub const MAX_DECEL_MPHPS: f64 = -5.3;

/// Relative tolerance for monotonicity and knot-derivative checks.
pub const REL_TOL: f64 = 1e-9;
/// Step for the finite-difference derivative checks, in seconds.
pub const FD_STEP_S: f64 = 1e-3;
pub const FD_V_TOL: f64 = 1e-4;
pub const FD_A_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("no AVL overlap: no door-open second falls inside the trajectory")]
    NoAvlOverlap,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedValidationReport {
    pub threshold_mph: Vec<f64>,
    pub captured_pct: Vec<f64>,
    pub captured_seconds: Vec<usize>,
    pub total_dooropen_seconds: usize,
}

/// Integer seconds into the trip with a door open, restricted to `[0, end]`.
/// Both interval ends count.
pub fn door_open_seconds(events: &[AvlDoorEvent], origin_time: i64, end: f64) -> Vec<i64> {
    let last = end.floor() as i64;
    let mut secs = BTreeSet::new();
    for e in events {
        let lo = (e.open_at - origin_time).max(0);
        let hi = (e.close_at - origin_time).min(last);
        secs.extend(lo..=hi);
    }
    secs.into_iter().collect()
}

pub fn validate_speed(
    traj: &Trajectory,
    events: &[AvlDoorEvent],
    thresholds_mph: &[f64],
) -> Result<SpeedValidationReport, ValidationError> {
    let secs = door_open_seconds(events, traj.origin_time(), traj.domain().1);
    if secs.is_empty() {
        return Err(ValidationError::NoAvlOverlap);
    }
    let speeds: Vec<f64> = secs
        .iter()
        .map(|&s| traj.eval_v(s as f64))
        .collect::<Result<_, _>>()?;
    let captured_seconds: Vec<usize> = thresholds_mph
        .iter()
        .map(|&th| {
            let limit = mph_to_mps(th);
            speeds.iter().filter(|&&v| v <= limit).count()
        })
        .collect();
    let total = secs.len();
    Ok(SpeedValidationReport {
        threshold_mph: thresholds_mph.to_vec(),
        captured_pct: captured_seconds
            .iter()
            .map(|&c| 100.0 * c as f64 / total as f64)
            .collect(),
        captured_seconds,
        total_dooropen_seconds: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccelValidationReport {
    pub max_accel_mphps: f64,
    pub max_decel_mphps: f64,
    pub unreasonable_pct: f64,
    pub unreasonable: usize,
    pub samples: usize,
}

/// Samples `a(t)` at `sample_hz` and counts values outside `bounds`
/// (`(min, max)` in mphps).
pub fn validate_accel(
    traj: &Trajectory,
    bounds: (f64, f64),
    sample_hz: f64,
) -> Result<AccelValidationReport, ValidationError> {
    if !(sample_hz > 0.0) || !sample_hz.is_finite() {
        return Err(ValidationError::Config(format!(
            "sample rate {sample_hz} must be positive"
        )));
    }
    if !(bounds.0 < bounds.1) {
        return Err(ValidationError::Config(format!(
            "acceleration bounds {:?} are not increasing",
            bounds
        )));
    }
    let (lo, hi) = (mphps_to_mps2(bounds.0), mphps_to_mps2(bounds.1));
    let times = sample_grid(traj.domain().1, sample_hz);
    let mut unreasonable = 0;
    for &t in &times {
        let a = traj.eval_a(t)?;
        if a < lo || a > hi {
            unreasonable += 1;
        }
    }
    Ok(AccelValidationReport {
        max_accel_mphps: bounds.1,
        max_decel_mphps: bounds.0,
        unreasonable_pct: 100.0 * unreasonable as f64 / times.len() as f64,
        unreasonable,
        samples: times.len(),
    })
}

/// Dense-sampling monotonicity check at `hz`, allowing roundoff of
/// [`REL_TOL`] relative.
pub fn is_monotone(traj: &Trajectory, hz: f64) -> Result<bool, FitError> {
    let mut prev = f64::NEG_INFINITY;
    for t in sample_grid(traj.domain().1, hz) {
        let x = traj.eval_x(t)?;
        if x < prev && !close_rel(x, prev, REL_TOL) {
            return Ok(false);
        }
        prev = prev.max(x);
    }
    Ok(true)
}

/// Every piece has degree at most 3 and at least one is genuinely curved.
/// Models without fixed pieces fail.
pub fn is_cubic(traj: &Trajectory) -> bool {
    match traj.pieces() {
        Some(pp) => {
            let degrees: Vec<usize> = (0..pp.num_pieces()).map(|k| pp.piece_degree(k)).collect();
            degrees.iter().all(|&d| d <= 3) && degrees.iter().any(|&d| d > 1)
        }
        None => false,
    }
}

/// Largest relative gap between left and right first derivatives over the
/// interior knots, or `None` when the model has no fixed pieces.
pub fn max_knot_derivative_gap(traj: &Trajectory) -> Option<f64> {
    let pp = traj.pieces()?;
    let mut worst: f64 = 0.0;
    for k in 1..pp.num_pieces() {
        let left = pp.left_derivative_at_end(k - 1, 1);
        let right = pp.right_derivative_at_start(k, 1);
        let scale = left.abs().max(right.abs()).max(1.0);
        worst = worst.max((left - right).abs() / scale);
    }
    Some(worst)
}

/// Interval midpoints, kept at least two finite-difference steps from any
/// knot.
pub fn interior_probe_times(traj: &Trajectory) -> Vec<f64> {
    let (t, _) = traj.knots();
    t.windows(2)
        .filter(|w| w[1] - w[0] > 4.0 * FD_STEP_S)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

/// Worst relative disagreement between `eval_v` and a central difference of
/// `eval_x`, and between `eval_a` and a central difference of `eval_v`, at
/// `times`.
pub fn finite_difference_gaps(traj: &Trajectory, times: &[f64]) -> Result<(f64, f64), FitError> {
    let h = FD_STEP_S;
    let (mut gv, mut ga): (f64, f64) = (0.0, 0.0);
    for &t in times {
        let fd_v = (traj.eval_x(t + h)? - traj.eval_x(t - h)?) / (2.0 * h);
        let v = traj.eval_v(t)?;
        gv = gv.max((v - fd_v).abs() / v.abs().max(fd_v.abs()).max(1.0));
        let fd_a = (traj.eval_v(t + h)? - traj.eval_v(t - h)?) / (2.0 * h);
        let a = traj.eval_a(t)?;
        ga = ga.max((a - fd_a).abs() / a.abs().max(fd_a.abs()).max(1.0));
    }
    Ok((gv, ga))
}

/// Once-differentiability: matching one-sided first derivatives at interior
/// knots, and a speed that is the derivative of the position everywhere.
pub fn is_differentiable(traj: &Trajectory) -> Result<bool, FitError> {
    if let Some(gap) = max_knot_derivative_gap(traj) {
        if gap > REL_TOL {
            return Ok(false);
        }
    }
    let (gv, _) = finite_difference_gaps(traj, &interior_probe_times(traj))?;
    Ok(gv <= FD_V_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorecardConfig {
    pub locreg: LocregConfig,
    /// Stop-speed threshold used for the AVL figure.
    pub stop_speed_mph: f64,
    pub accel_bounds_mphps: (f64, f64),
    pub accel_sample_hz: f64,
    pub monotone_sample_hz: f64,
}

impl Default for ScorecardConfig {
    fn default() -> Self {
        Self {
            locreg: LocregConfig::default(),
            stop_speed_mph: 5.0,
            accel_bounds_mphps: (MAX_DECEL_MPHPS, MAX_ACCEL_MPHPS),
            accel_sample_hz: 1.0,
            monotone_sample_hz: 10.0,
        }
    }
}

/// One row of the scorecard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmScore {
    pub name: Algorithm,
    pub mon: bool,
    pub cub: bool,
    pub diff: bool,
    pub err: bool,
    /// Door-open capture percentage keyed by stop-speed threshold (mph).
    /// Absent when no door-open second overlaps the trip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avl_pct: Option<IndexMap<String, f64>>,
    /// Percentage of acceleration samples outside the bounds.
    pub acc_pct: f64,
    /// Percentage of acceleration samples within the bounds.
    pub acc_within_pct: f64,
    pub best: bool,
    /// Values between knots come from refitted local regressions.
    pub continuous_extension: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scorecard {
    pub algorithms: Vec<AlgorithmScore>,
}

impl Scorecard {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmScore> {
        self.algorithms.iter().find(|s| s.name == algorithm)
    }
}

/// Scores one fitted trajectory.
pub fn score_trajectory(
    traj: &Trajectory,
    events: &[AvlDoorEvent],
    thresholds_mph: &[f64],
    config: &ScorecardConfig,
) -> Result<AlgorithmScore, ValidationError> {
    let algorithm = traj.algorithm();
    let mon = is_monotone(traj, config.monotone_sample_hz)?;
    let cub = is_cubic(traj);
    let diff = is_differentiable(traj)?;
    let err = algorithm.estimates_error();
    let avl_pct = match validate_speed(traj, events, thresholds_mph) {
        Ok(r) => Some(
            r.threshold_mph
                .iter()
                .zip(&r.captured_pct)
                .map(|(th, pct)| (format!("{th}"), *pct))
                .collect(),
        ),
        Err(ValidationError::NoAvlOverlap) => None,
        Err(e) => return Err(e),
    };
    let acc = validate_accel(traj, config.accel_bounds_mphps, config.accel_sample_hz)?;
    Ok(AlgorithmScore {
        name: algorithm,
        mon,
        cub,
        diff,
        err,
        avl_pct,
        acc_pct: acc.unreasonable_pct,
        acc_within_pct: 100.0 - acc.unreasonable_pct,
        best: mon && cub && diff && err,
        continuous_extension: traj.is_continuous_extension(),
    })
}

/// Fits all four algorithms with default settings and scores them.
pub fn build_scorecard(
    series: &TimeDistanceSeries,
    events: &[AvlDoorEvent],
) -> Result<Scorecard, ValidationError> {
    build_scorecard_with(series, events, &Algorithm::ALL, &ScorecardConfig::default())
}

pub fn build_scorecard_with(
    series: &TimeDistanceSeries,
    events: &[AvlDoorEvent],
    algorithms: &[Algorithm],
    config: &ScorecardConfig,
) -> Result<Scorecard, ValidationError> {
    let mut thresholds = DEFAULT_THRESHOLDS_MPH.to_vec();
    if !thresholds.contains(&config.stop_speed_mph) {
        thresholds.push(config.stop_speed_mph);
    }
    let algorithms = algorithms
        .iter()
        .map(|&alg| {
            let traj = fit(alg, series, &config.locreg)?;
            score_trajectory(&traj, events, &thresholds, config)
        })
        .collect::<Result<_, _>>()?;
    Ok(Scorecard { algorithms })
}

/// JSON document written by the `evaluate` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub trip_id: String,
    pub algorithms: Vec<AlgorithmScore>,
}
