//! Trajectory models fitted to a [`TimeDistanceSeries`].
//!
//! Four algorithms are available:
//!
//! * **LSEG** joins adjacent points with straight lines. Speed is the
//!   forward-difference slope and acceleration the forward difference of
//!   those slopes, both piecewise constant.
//! * **PCHIP** interpolates with a monotone piecewise cubic Hermite
//!   polynomial. Speed is continuous; acceleration jumps at knots.
//! * **LOCREG** estimates the true distance at any time with a local
//!   weighted cubic fit. It models measurement error but may decrease.
//!   Continuous evaluation refits at every query time.
//! * **LOCREG-PCHIP** evaluates LOCREG at the knots, replaces every value
//!   below its predecessor with that predecessor, and interpolates the result
//!   with PCHIP.
//!
//! Trajectories are immutable once fitted and are defined on `[0, t_n]` only.

mod locreg;
mod pchip;
mod piecewise;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tripframe::TimeDistanceSeries;

pub use locreg::{fit_at, neighbourhood, Kernel, LocalFit, LocregConfig, Neighbourhood};
pub use pchip::{hermite, pchip, pchip_slopes};
pub use piecewise::{Cubic, PiecewisePolynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {n}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("distance decreases at index {0}")]
    Decreasing(usize),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("t = {t} outside trajectory domain [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LSEG")]
    Lseg,
    #[serde(rename = "PCHIP")]
    Pchip,
    #[serde(rename = "LOCREG")]
    Locreg,
    #[serde(rename = "LOCREG-PCHIP")]
    LocregPchip,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Lseg,
        Algorithm::Locreg,
        Algorithm::LocregPchip,
        Algorithm::Pchip,
    ];

    /// Display name, e.g. `LOCREG-PCHIP`.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lseg => "LSEG",
            Algorithm::Pchip => "PCHIP",
            Algorithm::Locreg => "LOCREG",
            Algorithm::LocregPchip => "LOCREG-PCHIP",
        }
    }

    /// Lower-case form used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Algorithm::Lseg => "lseg",
            Algorithm::Pchip => "pchip",
            Algorithm::Locreg => "locreg",
            Algorithm::LocregPchip => "locreg-pchip",
        }
    }

    /// Whether the algorithm models measurement error in the distances.
    pub fn estimates_error(self) -> bool {
        matches!(self, Algorithm::Locreg | Algorithm::LocregPchip)
    }

    /// Whether the trajectory passes through its knots.
    pub fn interpolates(self) -> bool {
        !matches!(self, Algorithm::Locreg)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "lseg" => Ok(Algorithm::Lseg),
            "pchip" => Ok(Algorithm::Pchip),
            "locreg" => Ok(Algorithm::Locreg),
            "locreg-pchip" => Ok(Algorithm::LocregPchip),
            other => Err(format!(
                "unknown algorithm `{other}` (expected lseg, pchip, locreg or locreg-pchip)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Cubic(PiecewisePolynomial),
    /// Straight lines with piecewise-constant acceleration per interval.
    Linear {
        poly: PiecewisePolynomial,
        accel: Vec<f64>,
    },
    /// Local regression refitted at each query.
    Local {
        d: Vec<f64>,
        config: LocregConfig,
    },
}

/// A continuous trajectory `x(t)` on `[0, t_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    algorithm: Algorithm,
    end: f64,
    origin_time: i64,
    origin_route_m: f64,
    knot_t: Vec<f64>,
    knot_x: Vec<f64>,
    model: Model,
}

/// Position, speed and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

impl Trajectory {
    fn new(
        series: &TimeDistanceSeries,
        algorithm: Algorithm,
        knot_x: Vec<f64>,
        model: Model,
    ) -> Self {
        Self {
            algorithm,
            end: series.duration(),
            origin_time: series.origin_time(),
            origin_route_m: series.origin_route_m(),
            knot_t: series.t().to_vec(),
            knot_x,
            model,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// The domain `[0, t_n]` in seconds into the trip.
    pub fn domain(&self) -> (f64, f64) {
        (0.0, self.end)
    }

    pub fn origin_time(&self) -> i64 {
        self.origin_time
    }

    pub fn origin_route_m(&self) -> f64 {
        self.origin_route_m
    }

    /// Knot times and the fitted distances there.
    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.knot_t, &self.knot_x)
    }

    /// The piecewise polynomial behind the trajectory. `None` for LOCREG,
    /// which is not a composite of fixed pieces.
    pub fn pieces(&self) -> Option<&PiecewisePolynomial> {
        match &self.model {
            Model::Cubic(p) | Model::Linear { poly: p, .. } => Some(p),
            Model::Local { .. } => None,
        }
    }

    /// True when values between knots come from refitting local regressions
    /// rather than from fixed pieces.
    pub fn is_continuous_extension(&self) -> bool {
        matches!(self.model, Model::Local { .. })
    }

    fn check(&self, t: f64) -> Result<(), FitError> {
        if (0.0..=self.end).contains(&t) {
            Ok(())
        } else {
            Err(FitError::OutOfDomain { t, end: self.end })
        }
    }

    fn local(&self, t: f64) -> Option<LocalFit> {
        match &self.model {
            Model::Local { d, config } => Some(fit_at(&self.knot_t, d, t, config)),
            _ => None,
        }
    }

    /// Distance into trip at `t`.
    pub fn eval_x(&self, t: f64) -> Result<f64, FitError> {
        self.check(t)?;
        Ok(match &self.model {
            Model::Cubic(p) | Model::Linear { poly: p, .. } => p.eval(t, 0),
            Model::Local { .. } => self.local(t).unwrap().x,
        })
    }

    /// Speed at `t`. At LSEG breakpoints this is the slope to the right.
    pub fn eval_v(&self, t: f64) -> Result<f64, FitError> {
        self.check(t)?;
        Ok(match &self.model {
            Model::Cubic(p) | Model::Linear { poly: p, .. } => p.eval(t, 1),
            Model::Local { .. } => self.local(t).unwrap().v,
        })
    }

    /// Acceleration at `t`.
    ///
    /// PCHIP-based trajectories are only once differentiable, so this jumps
    /// at knots; the piece to the right is used there.
    pub fn eval_a(&self, t: f64) -> Result<f64, FitError> {
        self.check(t)?;
        Ok(match &self.model {
            Model::Cubic(p) => p.eval(t, 2),
            Model::Linear { poly, accel } => accel[poly.locate(t)],
            Model::Local { .. } => self.local(t).unwrap().a,
        })
    }

    /// All three quantities at once (one local fit for LOCREG).
    pub fn eval(&self, t: f64) -> Result<State, FitError> {
        if let Some(fit) = {
            self.check(t)?;
            self.local(t)
        } {
            return Ok(State {
                t,
                x: fit.x,
                v: fit.v,
                a: fit.a,
            });
        }
        Ok(State {
            t,
            x: self.eval_x(t)?,
            v: self.eval_v(t)?,
            a: self.eval_a(t)?,
        })
    }

    /// Uniform sample times `k / hz` covering the domain, ending exactly at
    /// `t_n`.
    pub fn sample_times(&self, hz: f64) -> Vec<f64> {
        sample_grid(self.end, hz)
    }

    /// States sampled at `hz`.
    pub fn sample(&self, hz: f64) -> Vec<State> {
        self.sample_times(hz)
            .into_iter()
            .map(|t| self.eval(t).expect("grid lies in domain"))
            .collect()
    }
}

/// `0, 1/hz, 2/hz, ...` up to and including `end`.
pub fn sample_grid(end: f64, hz: f64) -> Vec<f64> {
    assert!(hz > 0.0, "sample rate must be positive");
    let steps = (end * hz + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=steps).map(|k| (k as f64 / hz).min(end)).collect();
    if *out.last().unwrap() < end {
        out.push(end);
    }
    out
}

/// A knot where local regression had to lower the polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DegradedFit {
    pub index: usize,
    pub degree: usize,
}

/// LOCREG estimates of the true distance at each knot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedDistances {
    pub x: Vec<f64>,
    pub degraded: Vec<DegradedFit>,
}

pub fn fit_lseg(series: &TimeDistanceSeries) -> Trajectory {
    let t = series.t();
    let d = series.d();
    let slopes: Vec<f64> = (0..t.len() - 1)
        .map(|k| (d[k + 1] - d[k]) / (t[k + 1] - t[k]))
        .collect();
    let coeffs = (0..t.len() - 1)
        .map(|k| [d[k], slopes[k], 0.0, 0.0])
        .collect();
    let mut accel: Vec<f64> = slopes
        .windows(2)
        .enumerate()
        .map(|(k, w)| (w[1] - w[0]) / (t[k + 1] - t[k]))
        .collect();
    // No following speed on the last interval.
    accel.push(0.0);
    let poly = PiecewisePolynomial::new(t.to_vec(), coeffs);
    Trajectory::new(
        series,
        Algorithm::Lseg,
        d.to_vec(),
        Model::Linear { poly, accel },
    )
}

pub fn fit_pchip(series: &TimeDistanceSeries) -> Result<Trajectory, FitError> {
    let poly = pchip(series.t(), series.d())?;
    Ok(Trajectory::new(
        series,
        Algorithm::Pchip,
        series.d().to_vec(),
        Model::Cubic(poly),
    ))
}

/// LOCREG estimates at every knot plus the continuous local-regression
/// trajectory.
pub fn fit_locreg(
    series: &TimeDistanceSeries,
    config: &LocregConfig,
) -> Result<(SmoothedDistances, Trajectory), FitError> {
    config.validate()?;
    let n = series.len();
    if n <= config.degree + 1 {
        return Err(FitError::TooFewPoints {
            n,
            needed: config.degree + 2,
        });
    }
    let t = series.t();
    let d = series.d();
    let mut x = Vec::with_capacity(n);
    let mut degraded = Vec::new();
    for (index, &ti) in t.iter().enumerate() {
        let fit = fit_at(t, d, ti, config);
        if fit.degree < config.degree {
            log::warn!(
                "local fit at t = {ti} fell back to degree {} (rank-deficient design)",
                fit.degree
            );
            degraded.push(DegradedFit {
                index,
                degree: fit.degree,
            });
        }
        x.push(fit.x);
    }
    let traj = Trajectory::new(
        series,
        Algorithm::Locreg,
        x.clone(),
        Model::Local {
            d: d.to_vec(),
            config: *config,
        },
    );
    Ok((SmoothedDistances { x, degraded }, traj))
}

/// Intermediate values of a LOCREG-PCHIP fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocregPchipFit {
    pub locreg: SmoothedDistances,
    /// LOCREG knot values after the running-maximum clamp.
    pub clamped: Vec<f64>,
    pub trajectory: Trajectory,
}

/// Running maximum: every value below its predecessor is raised to it.
pub fn clamp_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let next = match out.last() {
            Some(&prev) if v < prev => prev,
            _ => v,
        };
        out.push(next);
    }
    out
}

pub fn fit_locreg_pchip(
    series: &TimeDistanceSeries,
    config: &LocregConfig,
) -> Result<Trajectory, FitError> {
    fit_locreg_pchip_detailed(series, config).map(|f| f.trajectory)
}

pub fn fit_locreg_pchip_detailed(
    series: &TimeDistanceSeries,
    config: &LocregConfig,
) -> Result<LocregPchipFit, FitError> {
    if series.len() <= 2 {
        return Err(FitError::TooFewPoints {
            n: series.len(),
            needed: 3,
        });
    }
    let (locreg, _) = fit_locreg(series, config)?;
    let clamped = clamp_non_decreasing(&locreg.x);
    let poly = pchip(series.t(), &clamped)?;
    let trajectory = Trajectory::new(
        series,
        Algorithm::LocregPchip,
        clamped.clone(),
        Model::Cubic(poly),
    );
    Ok(LocregPchipFit {
        locreg,
        clamped,
        trajectory,
    })
}

/// Fits any of the four algorithms.
pub fn fit(
    algorithm: Algorithm,
    series: &TimeDistanceSeries,
    config: &LocregConfig,
) -> Result<Trajectory, FitError> {
    match algorithm {
        Algorithm::Lseg => Ok(fit_lseg(series)),
        Algorithm::Pchip => fit_pchip(series),
        Algorithm::Locreg => fit_locreg(series, config).map(|(_, t)| t),
        Algorithm::LocregPchip => fit_locreg_pchip(series, config),
    }
}
