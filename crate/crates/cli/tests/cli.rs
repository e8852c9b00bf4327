use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trajectory_core::ingest::tables::{read_matched_csv, read_samples_csv, read_series_csv};
use trajectory_core::ingest::{
    load_avl_events, load_heartbeats, load_route_pattern, HeartbeatFormat,
};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trajrecon"));
    c.env("TRAJ_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn trajrecon")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulated(dir: &Path) -> PathBuf {
    let sim = dir.join("sim");
    let out = run(&["simulate", "--out-dir", s(&sim)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    sim
}

fn pipeline(sim: &Path, out: &Path, extra: &[&str]) -> Output {
    let (hb, route, avl) = (
        sim.join("heartbeats.csv"),
        sim.join("route.geojson"),
        sim.join("avl.csv"),
    );
    let mut args = vec![
        "pipeline",
        "--heartbeats",
        s(&hb),
        "--route",
        s(&route),
        "--avl",
        s(&avl),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_inputs_that_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let hb = load_heartbeats(
        File::open(sim.join("heartbeats.csv")).unwrap(),
        HeartbeatFormat::Csv,
    )
    .unwrap();
    assert!(hb.rejects.is_empty());
    assert!(hb.records.len() > 100);
    let avl = load_avl_events(File::open(sim.join("avl.csv")).unwrap()).unwrap();
    assert!(avl.rejects.is_empty() && !avl.records.is_empty());
    load_route_pattern(File::open(sim.join("route.geojson")).unwrap()).unwrap();
    assert!(sim.join("truth.csv").exists());
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let out = tmp.path().join("out");
    let res = pipeline(&sim, &out, &[]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let matched = read_matched_csv(File::open(out.join("matched.csv")).unwrap()).unwrap();
    assert!(!matched.is_empty());
    let series = read_series_csv(File::open(out.join("series.csv")).unwrap()).unwrap();
    assert!(series.len() >= 3);
    for slug in ["lseg", "pchip", "locreg", "locreg-pchip"] {
        let rows =
            read_samples_csv(File::open(out.join(format!("trajectory_{slug}.csv"))).unwrap())
                .unwrap();
        assert!(!rows.is_empty(), "{slug}");
    }
    let report: serde_json::Value =
        serde_json::from_reader(File::open(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["trip_id"], "sim-standard");
    assert_eq!(report["algorithms"].as_array().unwrap().len(), 4);
    for key in [
        "name", "mon", "cub", "diff", "err", "avl_pct", "acc_pct", "best",
    ] {
        assert!(report["algorithms"][0].get(key).is_some(), "{key}");
    }
}

#[test]
fn algorithm_flag_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let out = tmp.path().join("out");
    let res = pipeline(&sim, &out, &["--algorithm", "locreg-pchip"]);
    assert!(res.status.success());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("trajectory_"))
        .collect();
    names.sort();
    assert_eq!(names, ["trajectory_locreg-pchip.csv"]);
    let report: serde_json::Value =
        serde_json::from_reader(File::open(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["algorithms"].as_array().unwrap().len(), 1);
    assert_eq!(report["algorithms"][0]["name"], "LOCREG-PCHIP");
}

#[test]
fn missing_route_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let res = run(&[
        "pipeline",
        "--heartbeats",
        s(&sim.join("heartbeats.csv")),
        "--route",
        s(&tmp.path().join("missing.geojson")),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("route: file not found"), "{err}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(pipeline(&sim, &a, &[]).status.success());
    assert!(pipeline(&sim, &b, &["--jobs", "4"]).status.success());
    for name in [
        "matched.csv",
        "series.csv",
        "trajectory_pchip.csv",
        "report.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn single_stage_commands_write_to_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let hb = sim.join("heartbeats.csv");
    let route = sim.join("route.geojson");
    let common = ["--heartbeats", s(&hb), "--route", s(&route)];

    let out = run(&[&["match"][..], &common].concat());
    assert!(out.status.success());
    assert!(read_matched_csv(&out.stdout[..]).unwrap().len() > 100);

    let out = run(&[&["frame"][..], &common].concat());
    assert!(out.status.success());
    let series = read_series_csv(&out.stdout[..]).unwrap();
    assert_eq!(series[0].t_s, 0.0);

    let out = run(&[
        &["reconstruct", "--algorithm", "pchip", "--sample-hz", "2"][..],
        &common,
    ]
    .concat());
    assert!(out.status.success());
    let rows = read_samples_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows[1].t_s, 0.5);

    let out = run(&[
        &["sample", "--algorithm", "lseg", "--at", "0,10"][..],
        &common,
    ]
    .concat());
    assert!(out.status.success());
    let rows = read_samples_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].x_m, 0.0);

    let out = run(&[&["sample", "--at", "1e9"][..], &common].concat());
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[&["evaluate"][..], &common].concat());
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["algorithms"][0].get("avl_pct").is_none());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let cfg = sim.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"heartbeats": ["heartbeats.csv"], "route": "route.geojson", "algorithm": "lseg", "sample_hz": 1}"#,
    )
    .unwrap();
    let out = run(&["reconstruct", "--config", s(&cfg), "--sample-hz", "4"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_samples_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows[1].t_s, 0.25);
}

#[test]
fn rejected_rows_give_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let mut text = std::fs::read_to_string(sim.join("heartbeats.csv")).unwrap();
    text.push_str("sim-standard,not-a-time,42.0,-71.0\n");
    let hb = tmp.path().join("dirty.csv");
    std::fs::write(&hb, text).unwrap();
    let res = run(&[
        "pipeline",
        "--heartbeats",
        s(&hb),
        "--route",
        s(&sim.join("route.geojson")),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_reader(File::open(tmp.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["ingest"]["heartbeat_rejects"], 1);
}

#[test]
fn several_trips_need_selection_or_nest_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulated(tmp.path());
    let text = std::fs::read_to_string(sim.join("heartbeats.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let body: Vec<&str> = lines.collect();
    let mut merged = format!("{header}\n");
    for l in &body {
        merged.push_str(l);
        merged.push('\n');
        merged.push_str(&l.replacen("sim-standard", "copy", 1));
        merged.push('\n');
    }
    let hb = tmp.path().join("two.csv");
    std::fs::write(&hb, merged).unwrap();
    let route = sim.join("route.geojson");

    let res = run(&["frame", "--heartbeats", s(&hb), "--route", s(&route)]);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&[
        "frame",
        "--heartbeats",
        s(&hb),
        "--route",
        s(&route),
        "--trip",
        "copy",
    ]);
    assert!(res.status.success());

    let out = tmp.path().join("out");
    let res = run(&[
        "pipeline",
        "--heartbeats",
        s(&hb),
        "--route",
        s(&route),
        "--out",
        s(&out),
        "--jobs",
        "2",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(
        std::fs::read(out.join("sim-standard/series.csv")).unwrap(),
        std::fs::read(out.join("copy/series.csv")).unwrap()
    );
}
