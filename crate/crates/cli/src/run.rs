//! Stage drivers for each subcommand.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use trajectory_core::ingest::tables::{
    write_matched_csv, write_samples_csv, write_series_csv, SampleRow,
};
use trajectory_core::ingest::{
    load_avl_events, load_heartbeats, load_route_pattern, merge_door_events, IngestError,
};
use trajectory_core::simulator::{
    simulate, standard_trip_spec, write_sim_outputs, SimSpecFile, STANDARD_SEED,
};
use trajectory_core::smoothing::{fit, FitError};
use trajectory_core::tripframe::{build_series_with_report, FrameReport};
use trajectory_core::validation::{score_trajectory, AlgorithmScore, ScorecardConfig};
use trajectory_core::{
    match_trip, Algorithm, AvlDoorEvent, HeartbeatRecord, MatchedPoint, RoutePattern,
    TimeDistanceSeries, Trajectory,
};

use crate::args::{Command, SampleArgs, SimulateArgs};
use crate::config::RunConfig;
use crate::error::{Exit, StageError, StageResult};

/// Algorithm used by single-trajectory commands when none is given.
const DEFAULT_ALGORITHM: Algorithm = Algorithm::LocregPchip;

pub fn dispatch(command: Command) -> StageResult<Exit> {
    match command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Sample(args) => run_sample(&args),
        Command::Match(args) => single(&RunConfig::resolve(&args)?, Stage::Match),
        Command::Frame(args) => single(&RunConfig::resolve(&args)?, Stage::Frame),
        Command::Reconstruct(args) => single(&RunConfig::resolve(&args)?, Stage::Reconstruct),
        Command::Evaluate(args) => single(&RunConfig::resolve(&args)?, Stage::Evaluate),
        Command::Pipeline(args) => run_pipeline(&RunConfig::resolve(&args)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Match,
    Frame,
    Reconstruct,
    Evaluate,
}

// ---------------------------------------------------------------- inputs

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestStats {
    pub heartbeat_rows: usize,
    pub heartbeat_rejects: usize,
    pub avl_rows: usize,
    pub avl_rejects: usize,
    pub avl_merged: usize,
    pub truncated_subsecond: usize,
}

struct Inputs {
    pattern: RoutePattern,
    /// Trips in order of first appearance, each sorted by timestamp.
    trips: Vec<(String, Vec<HeartbeatRecord>)>,
    events: Vec<AvlDoorEvent>,
    stats: IngestStats,
}

fn open(stage: &'static str, path: &Path) -> StageResult<File> {
    File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => StageError::not_found(stage, path),
        _ => StageError::input(stage, format!("{}: {e}", path.display())),
    })
}

fn ingest_err<'a>(stage: &'static str, path: &'a Path) -> impl Fn(IngestError) -> StageError + 'a {
    move |e| StageError::input(stage, format!("{}: {e}", path.display()))
}

fn load_inputs(cfg: &RunConfig) -> StageResult<Inputs> {
    let route_path = cfg.require_route()?;
    let pattern =
        load_route_pattern(open("route", route_path)?).map_err(ingest_err("route", route_path))?;

    if cfg.heartbeats.is_empty() {
        return Err(StageError::input(
            "heartbeats",
            "no heartbeat file given (use --heartbeats)",
        ));
    }
    let mut stats = IngestStats::default();
    let mut trips: Vec<(String, Vec<HeartbeatRecord>)> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for path in &cfg.heartbeats {
        let report = load_heartbeats(open("heartbeats", path)?, cfg.format_for(path))
            .map_err(ingest_err("heartbeats", path))?;
        for r in &report.rejects {
            warn!("{}: rejected {r}", path.display());
        }
        stats.heartbeat_rows += report.rows;
        stats.heartbeat_rejects += report.rejects.len();
        stats.truncated_subsecond += report.truncated_subsecond;
        for rec in report.records {
            let i = *slot.entry(rec.trip_id.clone()).or_insert_with(|| {
                trips.push((rec.trip_id.clone(), Vec::new()));
                trips.len() - 1
            });
            trips[i].1.push(rec);
        }
    }
    for (_, recs) in &mut trips {
        recs.sort_by_key(|r| r.timestamp);
    }

    let events = match &cfg.avl {
        Some(path) => {
            let report = load_avl_events(open("avl", path)?).map_err(ingest_err("avl", path))?;
            for r in &report.rejects {
                warn!("{}: rejected {r}", path.display());
            }
            stats.avl_rows += report.rows;
            stats.avl_rejects += report.rejects.len();
            stats.avl_merged += report.merged;
            stats.truncated_subsecond += report.truncated_subsecond;
            report.records
        }
        None => Vec::new(),
    };
    info!(
        "loaded {} trips, {} AVL events, route with {} segments",
        trips.len(),
        events.len(),
        pattern.len()
    );
    Ok(Inputs {
        pattern,
        trips,
        events,
        stats,
    })
}

impl Inputs {
    fn select(&self, wanted: Option<&str>) -> StageResult<usize> {
        match wanted {
            Some(id) => self
                .trips
                .iter()
                .position(|(t, _)| t == id)
                .ok_or_else(|| StageError::input("ingest", format!("trip `{id}` not found"))),
            None => match self.trips.len() {
                0 => Err(StageError::input("ingest", "no valid heartbeat records")),
                1 => Ok(0),
                n => Err(StageError::input(
                    "ingest",
                    format!("input holds {n} trips; choose one with --trip"),
                )),
            },
        }
    }

    fn events_for(&self, trip_id: &str) -> Vec<AvlDoorEvent> {
        merge_door_events(
            self.events
                .iter()
                .filter(|e| e.trip_id == trip_id)
                .cloned()
                .collect(),
        )
    }
}

// ---------------------------------------------------------------- stages

#[derive(Debug, Clone, Serialize)]
pub struct MatchStats {
    pub points: usize,
    pub valid: usize,
    pub invalid: usize,
}

/// JSON document written as `report.json` and by `evaluate`.
#[derive(Debug, Clone, Serialize)]
pub struct TripReport {
    pub trip_id: String,
    pub algorithms: Vec<AlgorithmScore>,
    pub ingest: IngestStats,
    #[serde(rename = "match")]
    pub matching: MatchStats,
    pub frame: FrameReport,
}

fn match_stage(
    records: &[HeartbeatRecord],
    pattern: &RoutePattern,
    cfg: &RunConfig,
) -> StageResult<Vec<MatchedPoint>> {
    match_trip(records, pattern, &cfg.matching).map_err(|e| StageError::input("match", e))
}

fn frame_stage(
    points: &[MatchedPoint],
    pattern: &RoutePattern,
) -> StageResult<(TimeDistanceSeries, FrameReport)> {
    build_series_with_report(points, pattern).map_err(|e| StageError::input("frame", e))
}

fn fit_err(e: FitError) -> StageError {
    match e {
        FitError::TooFewPoints { .. } | FitError::Input(_) | FitError::Config(_) => {
            StageError::input("fit", e)
        }
        _ => StageError::internal("fit", e),
    }
}

fn fit_stage(
    alg: Algorithm,
    series: &TimeDistanceSeries,
    cfg: &RunConfig,
) -> StageResult<Trajectory> {
    fit(alg, series, &cfg.locreg).map_err(fit_err)
}

fn score_stage(
    traj: &Trajectory,
    events: &[AvlDoorEvent],
    cfg: &RunConfig,
) -> StageResult<AlgorithmScore> {
    let sc = ScorecardConfig {
        locreg: cfg.locreg,
        accel_bounds_mphps: cfg.accel_bounds_mphps,
        accel_sample_hz: cfg.accel_hz,
        ..ScorecardConfig::default()
    };
    score_trajectory(traj, events, &cfg.thresholds_mph, &sc)
        .map_err(|e| StageError::internal("evaluate", e))
}

fn samples(traj: &Trajectory, hz: f64) -> Vec<SampleRow> {
    traj.sample(hz).into_iter().map(SampleRow::from).collect()
}

/// Everything produced for one trip, serialised in memory.
struct TripArtifacts {
    trip_id: String,
    matched_csv: Vec<u8>,
    series_csv: Vec<u8>,
    trajectories: Vec<(Algorithm, Vec<u8>)>,
    report: TripReport,
}

impl TripArtifacts {
    fn has_failures(&self, avl_given: bool) -> bool {
        let ing = &self.report.ingest;
        ing.heartbeat_rejects > 0
            || ing.avl_rejects > 0
            || (avl_given && self.report.algorithms.iter().any(|a| a.avl_pct.is_none()))
    }
}

fn write_err(path: &Path) -> impl Fn(io::Error) -> StageError + '_ {
    move |e| StageError::internal("write", format!("{}: {e}", path.display()))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), IngestError>) -> StageResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| StageError::internal("write", e))?;
    Ok(buf)
}

fn process_trip(
    trip_id: &str,
    records: &[HeartbeatRecord],
    inputs: &Inputs,
    cfg: &RunConfig,
    algorithms: &[Algorithm],
) -> StageResult<TripArtifacts> {
    let pattern = &inputs.pattern;
    let points = match_stage(records, pattern, cfg)?;
    let (series, frame) = frame_stage(&points, pattern)?;
    let events = inputs.events_for(trip_id);

    let mut trajectories = Vec::with_capacity(algorithms.len());
    let mut scores = Vec::with_capacity(algorithms.len());
    for &alg in algorithms {
        let traj = fit_stage(alg, &series, cfg)?;
        scores.push(score_stage(&traj, &events, cfg)?);
        let rows = samples(&traj, cfg.sample_hz);
        trajectories.push((alg, csv_bytes(|b| write_samples_csv(b, &rows))?));
    }

    let valid = points.iter().filter(|p| p.valid).count();
    Ok(TripArtifacts {
        trip_id: trip_id.to_string(),
        matched_csv: csv_bytes(|b| write_matched_csv(b, &points, pattern))?,
        series_csv: csv_bytes(|b| write_series_csv(b, &series))?,
        trajectories,
        report: TripReport {
            trip_id: trip_id.to_string(),
            algorithms: scores,
            ingest: inputs.stats.clone(),
            matching: MatchStats {
                points: points.len(),
                valid,
                invalid: points.len() - valid,
            },
            frame,
        },
    })
}

fn report_json(report: &TripReport) -> StageResult<Vec<u8>> {
    let mut buf =
        serde_json::to_vec_pretty(report).map_err(|e| StageError::internal("write", e))?;
    buf.push(b'\n');
    Ok(buf)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> StageResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(write_err(dir))?;
            }
            std::fs::write(path, bytes).map_err(write_err(path))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| StageError::internal("write", e))
        }
    }
}

fn exit_for(failures: bool) -> Exit {
    if failures {
        Exit::ValidationFailures
    } else {
        Exit::Ok
    }
}

fn ingest_failures(stats: &IngestStats) -> bool {
    stats.heartbeat_rejects > 0 || stats.avl_rejects > 0
}

// ---------------------------------------------------------------- commands

fn single(cfg: &RunConfig, stage: Stage) -> StageResult<Exit> {
    let inputs = load_inputs(cfg)?;
    let idx = inputs.select(cfg.trip.as_deref())?;
    let (trip_id, records) = &inputs.trips[idx];
    let pattern = &inputs.pattern;
    let out = cfg.out.as_deref();

    let points = match_stage(records, pattern, cfg)?;
    if stage == Stage::Match {
        emit(out, &csv_bytes(|b| write_matched_csv(b, &points, pattern))?)?;
        return Ok(exit_for(ingest_failures(&inputs.stats)));
    }
    let (series, frame) = frame_stage(&points, pattern)?;
    match stage {
        Stage::Match => unreachable!(),
        Stage::Frame => {
            emit(out, &csv_bytes(|b| write_series_csv(b, &series))?)?;
            Ok(exit_for(ingest_failures(&inputs.stats)))
        }
        Stage::Reconstruct => {
            let traj = fit_stage(cfg.algorithm.unwrap_or(DEFAULT_ALGORITHM), &series, cfg)?;
            let rows = samples(&traj, cfg.sample_hz);
            emit(out, &csv_bytes(|b| write_samples_csv(b, &rows))?)?;
            Ok(exit_for(ingest_failures(&inputs.stats)))
        }
        Stage::Evaluate => {
            let events = inputs.events_for(trip_id);
            let algorithms = selected(cfg);
            let scores = algorithms
                .iter()
                .map(|&alg| score_stage(&fit_stage(alg, &series, cfg)?, &events, cfg))
                .collect::<StageResult<Vec<_>>>()?;
            let valid = points.iter().filter(|p| p.valid).count();
            let report = TripReport {
                trip_id: trip_id.clone(),
                algorithms: scores,
                ingest: inputs.stats.clone(),
                matching: MatchStats {
                    points: points.len(),
                    valid,
                    invalid: points.len() - valid,
                },
                frame,
            };
            emit(out, &report_json(&report)?)?;
            let avl_missing =
                cfg.avl.is_some() && report.algorithms.iter().any(|a| a.avl_pct.is_none());
            Ok(exit_for(ingest_failures(&inputs.stats) || avl_missing))
        }
    }
}

fn selected(cfg: &RunConfig) -> Vec<Algorithm> {
    match cfg.algorithm {
        Some(a) => vec![a],
        None => Algorithm::ALL.to_vec(),
    }
}

fn run_sample(args: &SampleArgs) -> StageResult<Exit> {
    let cfg = RunConfig::resolve(&args.run)?;
    let inputs = load_inputs(&cfg)?;
    let (_, records) = &inputs.trips[inputs.select(cfg.trip.as_deref())?];
    let points = match_stage(records, &inputs.pattern, &cfg)?;
    let (series, _) = frame_stage(&points, &inputs.pattern)?;
    let traj = fit_stage(cfg.algorithm.unwrap_or(DEFAULT_ALGORITHM), &series, &cfg)?;
    let rows = args
        .at
        .iter()
        .map(|&t| {
            traj.eval(t)
                .map(SampleRow::from)
                .map_err(|e| StageError::input("sample", e))
        })
        .collect::<StageResult<Vec<_>>>()?;
    emit(
        cfg.out.as_deref(),
        &csv_bytes(|b| write_samples_csv(b, &rows))?,
    )?;
    Ok(exit_for(ingest_failures(&inputs.stats)))
}

/// Runs every stage for every trip; one trip writes straight into `--out`,
/// several write into `--out/<trip_id>/`.
pub fn run_pipeline(cfg: &RunConfig) -> StageResult<Exit> {
    let out_dir = cfg
        .out
        .clone()
        .ok_or_else(|| StageError::input("config", "pipeline needs --out DIR"))?;
    let inputs = load_inputs(cfg)?;
    let chosen: Vec<usize> = match &cfg.trip {
        Some(id) => vec![inputs.select(Some(id))?],
        None if inputs.trips.is_empty() => {
            return Err(StageError::input("ingest", "no valid heartbeat records"))
        }
        None => (0..inputs.trips.len()).collect(),
    };
    let algorithms = selected(cfg);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| StageError::internal("pipeline", e))?;
    let results: Vec<StageResult<TripArtifacts>> = pool.install(|| {
        chosen
            .par_iter()
            .map(|&i| {
                let (id, recs) = &inputs.trips[i];
                process_trip(id, recs, &inputs, cfg, &algorithms).map_err(|mut e| {
                    if chosen.len() > 1 {
                        e.message = format!("trip {id}: {}", e.message);
                    }
                    e
                })
            })
            .collect()
    });

    let nested = chosen.len() > 1;
    let mut failures = false;
    for artifacts in results {
        let a = artifacts?;
        let dir = if nested {
            out_dir.join(&a.trip_id)
        } else {
            out_dir.clone()
        };
        write_artifacts(&a, &dir)?;
        failures |= a.has_failures(cfg.avl.is_some());
    }
    Ok(exit_for(failures))
}

fn write_artifacts(a: &TripArtifacts, dir: &Path) -> StageResult<()> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let put = |name: String, bytes: &[u8]| -> StageResult<()> {
        let path: PathBuf = dir.join(name);
        std::fs::write(&path, bytes).map_err(write_err(&path))
    };
    put("matched.csv".into(), &a.matched_csv)?;
    put("series.csv".into(), &a.series_csv)?;
    for (alg, bytes) in &a.trajectories {
        put(format!("trajectory_{}.csv", alg.slug()), bytes)?;
    }
    put("report.json".into(), &report_json(&a.report)?)
}

fn run_simulate(args: &SimulateArgs) -> StageResult<Exit> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => StageError::not_found("simulate", path),
                _ => StageError::input("simulate", e),
            })?;
            let file =
                SimSpecFile::from_json(&text).map_err(|e| StageError::input("simulate", e))?;
            let base = path.parent().unwrap_or(Path::new(""));
            file.resolve(base)
                .map_err(|e| StageError::input("simulate", e))?
        }
        None => standard_trip_spec(STANDARD_SEED),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let trip = simulate(&spec).map_err(|e| StageError::input("simulate", e))?;
    write_sim_outputs(&trip, &args.out_dir).map_err(|e| StageError::internal("write", e))?;
    info!(
        "simulated {} heartbeats, {} door events into {}",
        trip.heartbeats.len(),
        trip.avl_events.len(),
        args.out_dir.display()
    );
    Ok(Exit::Ok)
}
