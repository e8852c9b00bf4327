//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use trajectory_core::ingest::HeartbeatFormat;
use trajectory_core::smoothing::Kernel;
use trajectory_core::validation::{DEFAULT_THRESHOLDS_MPH, MAX_ACCEL_MPHPS, MAX_DECEL_MPHPS};
use trajectory_core::{Algorithm, LocregConfig, MatchConfig};

use crate::args::{HeartbeatFormatArg, RunArgs};
use crate::error::{StageError, StageResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    heartbeats: Option<Vec<PathBuf>>,
    heartbeat_format: Option<String>,
    route: Option<PathBuf>,
    avl: Option<PathBuf>,
    algorithm: Option<String>,
    sample_hz: Option<f64>,
    max_offset_m: Option<f64>,
    lookahead_segments: Option<usize>,
    bandwidth_points: Option<usize>,
    degree: Option<usize>,
    kernel: Option<Kernel>,
    thresholds_mph: Option<Vec<f64>>,
    accel_bounds_mphps: Option<(f64, f64)>,
    accel_hz: Option<f64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    trip: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub heartbeats: Vec<PathBuf>,
    pub heartbeat_format: Option<HeartbeatFormat>,
    pub route: Option<PathBuf>,
    pub avl: Option<PathBuf>,
    pub algorithm: Option<Algorithm>,
    pub sample_hz: f64,
    pub matching: MatchConfig,
    pub locreg: LocregConfig,
    pub thresholds_mph: Vec<f64>,
    pub accel_bounds_mphps: (f64, f64),
    pub accel_hz: f64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub trip: Option<String>,
}

const MAX_SAMPLE_HZ: f64 = 1000.0;

fn parse_format(s: &str) -> StageResult<HeartbeatFormat> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(HeartbeatFormat::Csv),
        "jsonl" | "json-lines" | "ndjson" => Ok(HeartbeatFormat::JsonLines),
        other => Err(StageError::input(
            "config",
            format!("unknown heartbeat format `{other}`"),
        )),
    }
}

fn load_file(path: &Path) -> StageResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => StageError::not_found("config", path),
        _ => StageError::input("config", e),
    })?;
    serde_json::from_str(&text).map_err(|e| StageError::input("config", e))
}

impl RunConfig {
    /// Merges the config file named by `--config` (if any) with the flags.
    /// Relative paths in the file are resolved against its directory.
    pub fn resolve(args: &RunArgs) -> StageResult<Self> {
        let (file, base) = match &args.config {
            Some(p) => (
                load_file(p)?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rebase = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let heartbeats = if args.heartbeats.is_empty() {
            file.heartbeats
                .unwrap_or_default()
                .into_iter()
                .map(rebase)
                .collect()
        } else {
            args.heartbeats.clone()
        };
        let heartbeat_format = match (args.heartbeat_format, &file.heartbeat_format) {
            (Some(HeartbeatFormatArg::Csv), _) => Some(HeartbeatFormat::Csv),
            (Some(HeartbeatFormatArg::Jsonl), _) => Some(HeartbeatFormat::JsonLines),
            (None, Some(s)) => Some(parse_format(s)?),
            (None, None) => None,
        };
        let algorithm = match (args.algorithm, &file.algorithm) {
            (Some(a), _) => Some(a),
            (None, Some(s)) => Some(
                s.parse::<Algorithm>()
                    .map_err(|e| StageError::input("config", e))?,
            ),
            (None, None) => None,
        };

        let defaults = MatchConfig::default();
        let matching = MatchConfig {
            max_offset_m: args
                .max_offset_m
                .or(file.max_offset_m)
                .unwrap_or(defaults.max_offset_m),
            lookahead_segments: args
                .lookahead_segments
                .or(file.lookahead_segments)
                .unwrap_or(defaults.lookahead_segments),
        };
        let ldef = LocregConfig::default();
        let locreg = LocregConfig {
            degree: args.degree.or(file.degree).unwrap_or(ldef.degree),
            bandwidth_points: args
                .bandwidth_points
                .or(file.bandwidth_points)
                .unwrap_or(ldef.bandwidth_points),
            kernel: file.kernel.unwrap_or(ldef.kernel),
        };

        let cfg = Self {
            heartbeats,
            heartbeat_format,
            route: args.route.clone().or(file.route.map(rebase)),
            avl: args.avl.clone().or(file.avl.map(rebase)),
            algorithm,
            sample_hz: args.sample_hz.or(file.sample_hz).unwrap_or(1.0),
            matching,
            locreg,
            thresholds_mph: args
                .thresholds
                .clone()
                .or(file.thresholds_mph)
                .unwrap_or_else(|| DEFAULT_THRESHOLDS_MPH.to_vec()),
            accel_bounds_mphps: file
                .accel_bounds_mphps
                .unwrap_or((MAX_DECEL_MPHPS, MAX_ACCEL_MPHPS)),
            accel_hz: args.accel_hz.or(file.accel_hz).unwrap_or(1.0),
            out: args.out.clone().or(file.out.map(rebase)),
            jobs: args.jobs.or(file.jobs).unwrap_or(1),
            trip: args.trip.clone().or(file.trip),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> StageResult<()> {
        let bad = |msg: String| Err(StageError::input("config", msg));
        for (name, hz) in [("sample-hz", self.sample_hz), ("accel-hz", self.accel_hz)] {
            if !(hz > 0.0 && hz <= MAX_SAMPLE_HZ) {
                return bad(format!("{name} must be in (0, {MAX_SAMPLE_HZ}], got {hz}"));
            }
        }
        if !(self.matching.max_offset_m > 0.0) || !self.matching.max_offset_m.is_finite() {
            return bad(format!(
                "max-offset-m must be positive, got {}",
                self.matching.max_offset_m
            ));
        }
        self.locreg.validate().or_else(|e| bad(e.to_string()))?;
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.thresholds_mph.is_empty() || self.thresholds_mph.iter().any(|t| !(*t >= 0.0)) {
            return bad("thresholds must be non-negative mph values".into());
        }
        let (lo, hi) = self.accel_bounds_mphps;
        if !(lo < 0.0 && hi > 0.0) {
            return bad(format!("acceleration bounds ({lo}, {hi}) must straddle 0"));
        }
        Ok(())
    }

    pub fn require_route(&self) -> StageResult<&Path> {
        self.route
            .as_deref()
            .ok_or_else(|| StageError::input("route", "no route given (use --route)"))
    }

    pub fn format_for(&self, path: &Path) -> HeartbeatFormat {
        self.heartbeat_format
            .unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
                Some("jsonl" | "ndjson") => HeartbeatFormat::JsonLines,
                _ => HeartbeatFormat::Csv,
            })
    }
}
