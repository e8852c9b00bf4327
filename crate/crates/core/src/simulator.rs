//! Synthetic bus trips with known ground truth.
//!
//! Motion is a sequence of constant-acceleration phases. The vehicle is
//! placed on the route geometry at its distance travelled, sampled at integer
//! second intervals drawn from a cadence distribution, and each fix is
//! displaced by isotropic Gaussian noise. Door-open intervals come from a
//! stop plan tied to stationary phases. Everything is deterministic given the
//! seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{point_at_fraction, GeoPoint};
use crate::ingest::{
    load_route_pattern, parse_timestamp, write_avl_csv, write_heartbeats_csv, write_route_geojson,
    AvlDoorEvent, HeartbeatRecord, IngestError, RoutePattern, RouteSegment,
};
use crate::smoothing::sample_grid;
use crate::units::mphps_to_mps2;

/// Rate of the dense truth table.
pub const TRUTH_HZ: f64 = 10.0;
/// A stop must lie within this distance of its stationary phase.
pub const STOP_MATCH_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("stop at {distance_m} m lies beyond the route ({route_m:.1} m available)")]
    StopBeyondRoute { distance_m: f64, route_m: f64 },
    #[error("trip travels {travelled_m:.1} m but the route has {route_m:.1} m available")]
    TravelBeyondRoute { travelled_m: f64, route_m: f64 },
    #[error("phase {0} drives the speed negative")]
    NegativeSpeed(usize),
    #[error("stop at {distance_m} m has no stationary phase long enough for {dwell_s} s")]
    NoDwellPhase { distance_m: f64, dwell_s: f64 },
    #[error("invalid simulation spec: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub duration_s: f64,
    pub accel_mps2: f64,
}

/// A door-open stop at `distance_m` into the trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopPlan {
    pub distance_m: f64,
    pub dwell_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_id: Option<String>,
}

/// Heartbeat cadence in whole seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplePeriod {
    Fixed(u32),
    Choice {
        periods: Vec<u32>,
        weights: Vec<f64>,
    },
}

impl SamplePeriod {
    /// Periods 3 to 10 s with mode 3 s and median 6 s.
    pub fn standard() -> Self {
        SamplePeriod::Choice {
            periods: (3..=10).collect(),
            weights: vec![0.22, 0.12, 0.12, 0.10, 0.12, 0.11, 0.11, 0.10],
        }
    }
}

impl Default for SamplePeriod {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTripSpec {
    pub pattern: RoutePattern,
    pub phases: Vec<Phase>,
    pub stop_plan: Vec<StopPlan>,
    pub noise_sigma_m: f64,
    pub sample_period_s: SamplePeriod,
    pub seed: u64,
    pub trip_id: String,
    /// Epoch seconds of the first heartbeat.
    pub start_time: i64,
    /// Route distance at which the trip begins.
    pub start_offset_m: f64,
}

/// One stop in a [`Profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStop {
    /// Distance into the trip.
    pub distance_m: f64,
    /// Time spent stationary.
    pub hold_s: f64,
    /// Door-open time in the middle of the hold; 0 for a traffic signal.
    #[serde(default)]
    pub door_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_id: Option<String>,
}

/// Stop-to-stop driving description, turned into phases by
/// [`SimTripSpec::from_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub cruise_mps: f64,
    pub accel_mps2: f64,
    pub decel_mps2: f64,
    /// Stationary time before departure.
    #[serde(default)]
    pub initial_hold_s: f64,
    pub stops: Vec<ProfileStop>,
    /// Where the trip ends, at rest.
    pub end_distance_m: f64,
}

/// Accelerate, cruise and brake over `length` starting and ending at rest.
fn leg_phases(length: f64, cruise: f64, accel: f64, decel: f64) -> Vec<Phase> {
    if length <= 0.0 {
        return Vec::new();
    }
    let peak = (2.0 * length * accel * decel / (accel + decel)).sqrt();
    if peak <= cruise {
        return vec![
            Phase {
                duration_s: peak / accel,
                accel_mps2: accel,
            },
            Phase {
                duration_s: peak / decel,
                accel_mps2: -decel,
            },
        ];
    }
    let d_acc = cruise * cruise / (2.0 * accel);
    let d_dec = cruise * cruise / (2.0 * decel);
    vec![
        Phase {
            duration_s: cruise / accel,
            accel_mps2: accel,
        },
        Phase {
            duration_s: (length - d_acc - d_dec) / cruise,
            accel_mps2: 0.0,
        },
        Phase {
            duration_s: cruise / decel,
            accel_mps2: -decel,
        },
    ]
}

impl SimTripSpec {
    /// Builds phases and the stop plan from a stop-to-stop profile.
    pub fn from_profile(
        pattern: RoutePattern,
        profile: &Profile,
        noise_sigma_m: f64,
        sample_period_s: SamplePeriod,
        seed: u64,
    ) -> Result<Self, SimError> {
        if !(profile.cruise_mps > 0.0 && profile.accel_mps2 > 0.0 && profile.decel_mps2 > 0.0) {
            return Err(SimError::Config(
                "cruise speed, acceleration and deceleration must be positive".into(),
            ));
        }
        let mut phases = Vec::new();
        let mut stop_plan = Vec::new();
        if profile.initial_hold_s > 0.0 {
            phases.push(Phase {
                duration_s: profile.initial_hold_s,
                accel_mps2: 0.0,
            });
        }
        let mut at = 0.0;
        for stop in &profile.stops {
            if stop.distance_m < at {
                return Err(SimError::Config(format!(
                    "profile stops out of order at {} m",
                    stop.distance_m
                )));
            }
            phases.extend(leg_phases(
                stop.distance_m - at,
                profile.cruise_mps,
                profile.accel_mps2,
                profile.decel_mps2,
            ));
            phases.push(Phase {
                duration_s: stop.hold_s,
                accel_mps2: 0.0,
            });
            if stop.door_s > 0.0 {
                stop_plan.push(StopPlan {
                    distance_m: stop.distance_m,
                    dwell_s: stop.door_s,
                    stop_id: stop.stop_id.clone(),
                });
            }
            at = stop.distance_m;
        }
        phases.extend(leg_phases(
            profile.end_distance_m - at,
            profile.cruise_mps,
            profile.accel_mps2,
            profile.decel_mps2,
        ));
        Ok(Self {
            pattern,
            phases,
            stop_plan,
            noise_sigma_m,
            sample_period_s,
            seed,
            trip_id: "sim".into(),
            start_time: 0,
            start_offset_m: 0.0,
        })
    }

    /// Whether every phase stays within the plausibility bounds
    /// `[-5.3, 3.7]` mphps.
    pub fn is_realistic(&self) -> bool {
        let (lo, hi) = (mphps_to_mps2(-5.3), mphps_to_mps2(3.7));
        self.phases
            .iter()
            .all(|p| p.accel_mps2 >= lo && p.accel_mps2 <= hi)
    }
}

/// Exact piecewise-constant-acceleration motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    /// Start time, position, speed and acceleration of each phase.
    starts: Vec<(f64, f64, f64, f64)>,
    end: (f64, f64, f64),
}

/// Speeds this small at a phase boundary are taken as exactly zero.
const SPEED_SNAP: f64 = 1e-9;

impl Kinematics {
    pub fn integrate(phases: &[Phase]) -> Result<Self, SimError> {
        let (mut t, mut x, mut v) = (0.0, 0.0, 0.0);
        let mut starts = Vec::with_capacity(phases.len());
        for (i, p) in phases.iter().enumerate() {
            if !(p.duration_s >= 0.0) || !p.accel_mps2.is_finite() {
                return Err(SimError::Config(format!("phase {i} is malformed")));
            }
            if p.duration_s == 0.0 {
                continue;
            }
            starts.push((t, x, v, p.accel_mps2));
            let dt = p.duration_s;
            x += v * dt + 0.5 * p.accel_mps2 * dt * dt;
            v += p.accel_mps2 * dt;
            t += dt;
            if v < -SPEED_SNAP {
                return Err(SimError::NegativeSpeed(i));
            }
            if v.abs() < SPEED_SNAP {
                v = 0.0;
            }
        }
        Ok(Self {
            starts,
            end: (t, x, v),
        })
    }

    pub fn duration(&self) -> f64 {
        self.end.0
    }

    pub fn total_distance(&self) -> f64 {
        self.end.1
    }

    /// `(x, v, a)` at `t`, clamped to the trip.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t >= self.end.0 || self.starts.is_empty() {
            return (self.end.1, self.end.2, 0.0);
        }
        let t = t.max(0.0);
        let k = self.starts.partition_point(|s| s.0 <= t).saturating_sub(1);
        let (t0, x0, v0, a) = self.starts[k];
        let s = t - t0;
        (x0 + v0 * s + 0.5 * a * s * s, v0 + a * s, a)
    }

    /// Stationary phases as `(start_t, end_t, x)`.
    pub fn stationary(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (k, &(t0, x0, v0, a)) in self.starts.iter().enumerate() {
            if a == 0.0 && v0 == 0.0 {
                let t1 = self.starts.get(k + 1).map_or(self.end.0, |s| s.0);
                out.push((t0, t1, x0));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub t_s: f64,
    pub x_m: f64,
    pub v_mps: f64,
    pub a_mps2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrip {
    pub trip_id: String,
    pub pattern: RoutePattern,
    pub kinematics: Kinematics,
    pub start_time: i64,
    pub start_offset_m: f64,
    /// Dense truth at [`TRUTH_HZ`]; `x_m` is distance travelled since the start.
    pub truth: Vec<TruthSample>,
    pub heartbeats: Vec<HeartbeatRecord>,
    pub avl_events: Vec<AvlDoorEvent>,
}

impl SimTrip {
    /// Route position of the vehicle `t` seconds after the start.
    pub fn route_position_at(&self, t: f64) -> f64 {
        self.start_offset_m + self.kinematics.eval(t).0
    }
}

/// Point on the route `s` meters from its start.
pub fn point_at_route_distance(pattern: &RoutePattern, s: f64) -> GeoPoint {
    let mut start = 0.0;
    for (k, seg) in pattern.segments.iter().enumerate() {
        let last = k + 1 == pattern.segments.len();
        if s <= start + seg.length_m || last {
            let f = ((s - start) / seg.length_m).clamp(0.0, 1.0);
            return point_at_fraction(&seg.polyline, f).expect("validated polyline");
        }
        start += seg.length_m;
    }
    unreachable!("pattern has at least one segment")
}

pub fn simulate(spec: &SimTripSpec) -> Result<SimTrip, SimError> {
    if !(spec.noise_sigma_m >= 0.0) || !spec.noise_sigma_m.is_finite() {
        return Err(SimError::Config("noise sigma must be non-negative".into()));
    }
    let kin = Kinematics::integrate(&spec.phases)?;
    let route_m = spec.pattern.total_length_m() - spec.start_offset_m;
    if spec.start_offset_m < 0.0 || kin.total_distance() > route_m + 1e-6 {
        return Err(SimError::TravelBeyondRoute {
            travelled_m: kin.total_distance(),
            route_m,
        });
    }

    let stationary = kin.stationary();
    let mut avl_events = Vec::with_capacity(spec.stop_plan.len());
    for stop in &spec.stop_plan {
        if stop.distance_m > route_m {
            return Err(SimError::StopBeyondRoute {
                distance_m: stop.distance_m,
                route_m,
            });
        }
        let no_dwell = || SimError::NoDwellPhase {
            distance_m: stop.distance_m,
            dwell_s: stop.dwell_s,
        };
        let &(t0, t1, _) = stationary
            .iter()
            .find(|&&(t0, t1, x)| {
                (x - stop.distance_m).abs() <= STOP_MATCH_TOLERANCE_M && t1 - t0 >= stop.dwell_s
            })
            .ok_or_else(no_dwell)?;
        let mid = 0.5 * (t0 + t1);
        let open = spec.start_time + (mid - 0.5 * stop.dwell_s).ceil() as i64;
        let close = spec.start_time + (mid + 0.5 * stop.dwell_s).floor() as i64;
        if close <= open {
            return Err(no_dwell());
        }
        avl_events.push(AvlDoorEvent {
            trip_id: spec.trip_id.clone(),
            open_at: open,
            close_at: close,
            stop_id: stop.stop_id.clone(),
        });
    }

    let truth = sample_grid(kin.duration(), TRUTH_HZ)
        .into_iter()
        .map(|t| {
            let (x, v, a) = kin.eval(t);
            TruthSample {
                t_s: t,
                x_m: x,
                v_mps: v,
                a_mps2: a,
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let period = PeriodSampler::new(&spec.sample_period_s)?;
    let noise = if spec.noise_sigma_m > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma_m).map_err(|e| SimError::Config(e.to_string()))?)
    } else {
        None
    };
    let mut heartbeats = Vec::new();
    let mut t: u64 = 0;
    while t as f64 <= kin.duration() {
        let s = spec.start_offset_m + kin.eval(t as f64).0;
        let mut p = point_at_route_distance(&spec.pattern, s);
        if let Some(n) = &noise {
            let north = n.sample(&mut rng);
            let east = n.sample(&mut rng);
            p = p.offset_m(north, east);
        }
        heartbeats.push(HeartbeatRecord {
            trip_id: spec.trip_id.clone(),
            timestamp: spec.start_time + t as i64,
            lat: p.lat,
            lon: p.lon,
        });
        t += u64::from(period.draw(&mut rng));
    }

    Ok(SimTrip {
        trip_id: spec.trip_id.clone(),
        pattern: spec.pattern.clone(),
        kinematics: kin,
        start_time: spec.start_time,
        start_offset_m: spec.start_offset_m,
        truth,
        heartbeats,
        avl_events,
    })
}

enum PeriodSampler {
    Fixed(u32),
    Choice(Vec<u32>, WeightedIndex<f64>),
}

impl PeriodSampler {
    fn new(period: &SamplePeriod) -> Result<Self, SimError> {
        match period {
            SamplePeriod::Fixed(0) => {
                Err(SimError::Config("sample period must be positive".into()))
            }
            SamplePeriod::Fixed(p) => Ok(Self::Fixed(*p)),
            SamplePeriod::Choice { periods, weights } => {
                if periods.is_empty() || periods.len() != weights.len() || periods.contains(&0) {
                    return Err(SimError::Config(
                        "sample periods must be positive and match their weights".into(),
                    ));
                }
                let idx = WeightedIndex::new(weights)
                    .map_err(|e| SimError::Config(format!("sample weights: {e}")))?;
                Ok(Self::Choice(periods.clone(), idx))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            Self::Fixed(p) => *p,
            Self::Choice(periods, idx) => periods[idx.sample(rng)],
        }
    }
}

/// Origin of the standard route.
pub const STANDARD_ORIGIN: GeoPoint = GeoPoint::new(42.372642, -71.119048);

/// A winding route of 6 km in 15 segments, with a vertex every 50 m.
pub fn standard_route() -> RoutePattern {
    // (bearing in degrees, length in meters) for each straight stretch.
    const LEGS: [(f64, f64); 6] = [
        (150.0, 900.0),
        (125.0, 1100.0),
        (160.0, 800.0),
        (135.0, 1200.0),
        (100.0, 900.0),
        (140.0, 1100.0),
    ];
    let mut vertices = vec![STANDARD_ORIGIN];
    for &(bearing, length) in &LEGS {
        let steps = (length / 50.0).round() as usize;
        for _ in 0..steps {
            let last = *vertices.last().unwrap();
            vertices.push(last.destination(bearing, length / steps as f64));
        }
    }
    // 120 edges split into 15 segments of 8 edges.
    let edges = vertices.len() - 1;
    let count = 15;
    let segments = (0..count)
        .map(|k| {
            let a = k * edges / count;
            let b = (k + 1) * edges / count;
            RouteSegment::from_polyline(format!("seg-{:02}", k + 1), vertices[a..=b].to_vec())
        })
        .collect();
    RoutePattern::new("standard", segments).expect("standard route is valid")
}

/// Congested urban stop-and-go along [`standard_route`]: cruise 4.5 m/s,
/// accelerate at 1.2 m/s², brake at 1.5 m/s², 13 door stops and 4 signal
/// stops over 5.8 km.
pub fn standard_profile() -> Profile {
    let doors = [
        300.0, 700.0, 1050.0, 1500.0, 1900.0, 2300.0, 2750.0, 3150.0, 3600.0, 4000.0, 4450.0,
        4900.0, 5350.0,
    ];
    let signals = [880.0, 2050.0, 3380.0, 4650.0];
    let door_s = [20.0, 30.0, 15.0, 40.0, 25.0, 35.0];
    let hold_s = [35.0, 25.0, 45.0];
    let mut stops: Vec<ProfileStop> = doors
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let door = door_s[i % door_s.len()];
            ProfileStop {
                distance_m: d,
                hold_s: door + 6.0,
                door_s: door,
                stop_id: Some(format!("stop-{:02}", i + 1)),
            }
        })
        .chain(signals.iter().enumerate().map(|(i, &d)| ProfileStop {
            distance_m: d,
            hold_s: hold_s[i % hold_s.len()],
            door_s: 0.0,
            stop_id: None,
        }))
        .collect();
    stops.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m));
    Profile {
        cruise_mps: 4.5,
        accel_mps2: 1.2,
        decel_mps2: 1.5,
        initial_hold_s: 0.0,
        stops,
        end_distance_m: 5800.0,
    }
}

/// Seed of the standard synthetic trip.
pub const STANDARD_SEED: u64 = 20220425;

/// The standard synthetic trip: [`standard_route`], [`standard_profile`],
/// 5 m noise and the standard cadence.
pub fn standard_trip_spec(seed: u64) -> SimTripSpec {
    let mut spec = SimTripSpec::from_profile(
        standard_route(),
        &standard_profile(),
        5.0,
        SamplePeriod::standard(),
        seed,
    )
    .expect("standard profile is valid");
    spec.trip_id = "sim-standard".into();
    spec.start_time = 1_650_873_600; // 2022-04-25T08:00:00Z
    spec
}

fn default_trip_id() -> String {
    "sim".into()
}

fn default_start_time() -> String {
    "2022-04-25T08:00:00Z".into()
}

fn default_sigma() -> f64 {
    5.0
}

/// JSON description of a simulated trip.
///
/// `route` is a GeoJSON path, relative to this file; the standard route
/// is used when absent. Motion comes from `phases` and `stop_plan` when
/// given, otherwise from `profile`, otherwise the standard profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<PathBuf>,
    #[serde(default = "default_trip_id")]
    pub trip_id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start_time")]
    pub start_time: String,
    #[serde(default = "default_sigma")]
    pub noise_sigma_m: f64,
    #[serde(default)]
    pub sample_period_s: SamplePeriod,
    #[serde(default)]
    pub start_offset_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<Phase>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_plan: Option<Vec<StopPlan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
}

impl SimSpecFile {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves the file into a full spec; relative route paths are taken
    /// from `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<SimTripSpec, SimError> {
        let pattern = match &self.route {
            Some(path) => {
                let path = base_dir.join(path);
                let file = std::fs::File::open(&path).map_err(IngestError::from)?;
                load_route_pattern(file)?
            }
            None => standard_route(),
        };
        let start_time = parse_timestamp(&self.start_time)
            .map_err(|e| SimError::Config(format!("start_time: {e}")))?
            .seconds;
        let mut spec = match (&self.phases, &self.profile) {
            (Some(phases), _) => SimTripSpec {
                pattern,
                phases: phases.clone(),
                stop_plan: self.stop_plan.clone().unwrap_or_default(),
                noise_sigma_m: self.noise_sigma_m,
                sample_period_s: self.sample_period_s.clone(),
                seed: self.seed,
                trip_id: String::new(),
                start_time,
                start_offset_m: 0.0,
            },
            (None, profile) => SimTripSpec::from_profile(
                pattern,
                profile.as_ref().unwrap_or(&standard_profile()),
                self.noise_sigma_m,
                self.sample_period_s.clone(),
                self.seed,
            )?,
        };
        spec.trip_id = self.trip_id.clone();
        spec.start_time = start_time;
        spec.start_offset_m = self.start_offset_m;
        Ok(spec)
    }
}

/// Writes `heartbeats.csv`, `avl.csv`, `truth.csv` and `route.geojson`.
pub fn write_sim_outputs(trip: &SimTrip, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(IngestError::from)?;
    let create = |name: &str| std::fs::File::create(dir.join(name)).map_err(IngestError::from);
    write_heartbeats_csv(create("heartbeats.csv")?, &trip.heartbeats)?;
    write_avl_csv(create("avl.csv")?, &trip.avl_events)?;
    let mut w = csv::Writer::from_writer(create("truth.csv")?);
    for s in &trip.truth {
        w.serialize(s).map_err(IngestError::from)?;
    }
    w.flush().map_err(IngestError::from)?;
    let mut route = create("route.geojson")?;
    route
        .write_all(write_route_geojson(&trip.pattern).as_bytes())
        .map_err(IngestError::from)?;
    Ok(())
}
