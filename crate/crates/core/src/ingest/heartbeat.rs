use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    column_indices, csv_reader, format_timestamp, parse_timestamp, HeartbeatFormat,
    HeartbeatRecord, IngestError, LoadReport,
};
use crate::geo::GeoPoint;

const COLUMNS: [&str; 4] = ["trip_id", "timestamp", "lat", "lon"];

/// Reads heartbeat records in file order.
///
/// A malformed header is fatal. Rows with bad fields are reported in
/// [`LoadReport::rejects`] and skipped.
pub fn load_heartbeats<R: Read>(
    source: R,
    format: HeartbeatFormat,
) -> Result<LoadReport<HeartbeatRecord>, IngestError> {
    match format {
        HeartbeatFormat::Csv => load_csv(source),
        HeartbeatFormat::JsonLines => load_jsonl(source),
    }
}

fn load_csv<R: Read>(source: R) -> Result<LoadReport<HeartbeatRecord>, IngestError> {
    let mut rdr = csv_reader(source);
    let headers = rdr.headers()?.clone();
    let [trip, ts, lat, lon] = column_indices(&headers, COLUMNS)?;

    let mut report = LoadReport::new();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() + 1;
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                report.rows += 1;
                let line = row.position().map_or(line, |p| p.line());
                let field = |i: usize| row.get(i).unwrap_or("");
                match build_record(field(trip), field(ts), field(lat), field(lon)) {
                    Ok((rec, truncated)) => {
                        report.truncated_subsecond += usize::from(truncated);
                        report.records.push(rec);
                    }
                    Err(reason) => report.reject(line, reason),
                }
            }
            Err(e) => {
                report.rows += 1;
                let line = e.position().map_or(line, |p| p.line());
                report.reject(line, e.to_string());
            }
        }
    }
    Ok(report)
}

#[derive(Deserialize)]
struct JsonRow {
    trip_id: String,
    timestamp: String,
    lat: f64,
    lon: f64,
}

fn load_jsonl<R: Read>(source: R) -> Result<LoadReport<HeartbeatRecord>, IngestError> {
    let mut report = LoadReport::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                report.rows += 1;
                report.reject(line_no, e.to_string());
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        report.rows += 1;
        let parsed = serde_json::from_str::<JsonRow>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| validate(r.trip_id, &r.timestamp, r.lat, r.lon));
        match parsed {
            Ok((rec, truncated)) => {
                report.truncated_subsecond += usize::from(truncated);
                report.records.push(rec);
            }
            Err(reason) => report.reject(line_no, reason),
        }
    }
    Ok(report)
}

fn build_record(
    trip_id: &str,
    timestamp: &str,
    lat: &str,
    lon: &str,
) -> Result<(HeartbeatRecord, bool), String> {
    let lat: f64 = lat
        .parse()
        .map_err(|_| format!("latitude `{lat}` is not a number"))?;
    let lon: f64 = lon
        .parse()
        .map_err(|_| format!("longitude `{lon}` is not a number"))?;
    validate(trip_id.to_string(), timestamp, lat, lon)
}

fn validate(
    trip_id: String,
    timestamp: &str,
    lat: f64,
    lon: f64,
) -> Result<(HeartbeatRecord, bool), String> {
    if trip_id.is_empty() {
        return Err("empty trip_id".into());
    }
    GeoPoint::checked(lat, lon).map_err(|e| e.to_string())?;
    let ts = parse_timestamp(timestamp)?;
    Ok((
        HeartbeatRecord {
            trip_id,
            timestamp: ts.seconds,
            lat,
            lon,
        },
        ts.truncated,
    ))
}

#[derive(Serialize)]
struct OutRow<'a> {
    trip_id: &'a str,
    timestamp: String,
    lat: f64,
    lon: f64,
}

impl<'a> From<&'a HeartbeatRecord> for OutRow<'a> {
    fn from(r: &'a HeartbeatRecord) -> Self {
        OutRow {
            trip_id: &r.trip_id,
            timestamp: format_timestamp(r.timestamp),
            lat: r.lat,
            lon: r.lon,
        }
    }
}

pub fn write_heartbeats_csv<W: Write>(
    sink: W,
    records: &[HeartbeatRecord],
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(sink);
    if records.is_empty() {
        wtr.write_record(COLUMNS)?;
    }
    for r in records {
        wtr.serialize(OutRow::from(r))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_heartbeats_jsonl<W: Write>(
    mut sink: W,
    records: &[HeartbeatRecord],
) -> Result<(), IngestError> {
    for r in records {
        let line = serde_json::to_string(&OutRow::from(r)).map_err(std::io::Error::other)?;
        writeln!(sink, "{line}")?;
    }
    Ok(())
}
