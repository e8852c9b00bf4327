//! Tabular outputs of the pipeline: matched points, time-distance series and
//! sampled trajectories. Every writer here has a matching reader.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{format_timestamp, parse_timestamp, IngestError, RoutePattern};
use crate::mapmatch::MatchedPoint;
use crate::smoothing::State;
use crate::tripframe::TimeDistanceSeries;

/// One row of the matched table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedRow {
    pub i: usize,
    pub timestamp: String,
    pub matched_lat: f64,
    pub matched_lon: f64,
    pub segment_id: String,
    pub p: f64,
    pub offset_m: f64,
    pub valid: bool,
}

impl MatchedRow {
    pub fn from_point(point: &MatchedPoint, pattern: &RoutePattern) -> Self {
        Self {
            i: point.index,
            timestamp: format_timestamp(point.time),
            matched_lat: point.matched.lat,
            matched_lon: point.matched.lon,
            segment_id: pattern.segments[point.segment_index].segment_id.clone(),
            p: point.along_fraction,
            offset_m: point.offset_m,
            valid: point.valid,
        }
    }

    pub fn epoch_seconds(&self) -> Result<i64, String> {
        parse_timestamp(&self.timestamp).map(|p| p.seconds)
    }
}

pub fn write_matched_csv<W: Write>(
    sink: W,
    points: &[MatchedPoint],
    pattern: &RoutePattern,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    for p in points {
        w.serialize(MatchedRow::from_point(p, pattern))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matched_csv<R: Read>(source: R) -> Result<Vec<MatchedRow>, IngestError> {
    read_rows(source)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t_s: f64,
    pub d_m: f64,
}

pub fn write_series_csv<W: Write>(sink: W, series: &TimeDistanceSeries) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    for (&t_s, &d_m) in series.t().iter().zip(series.d()) {
        w.serialize(SeriesRow { t_s, d_m })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(source: R) -> Result<Vec<SeriesRow>, IngestError> {
    read_rows(source)
}

/// One sampled trajectory state in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub t_s: f64,
    pub x_m: f64,
    pub v_mps: f64,
    pub a_mps2: f64,
}

impl From<State> for SampleRow {
    fn from(s: State) -> Self {
        Self {
            t_s: s.t,
            x_m: s.x,
            v_mps: s.v,
            a_mps2: s.a,
        }
    }
}

pub fn write_samples_csv<W: Write>(sink: W, rows: &[SampleRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(source: R) -> Result<Vec<SampleRow>, IngestError> {
    read_rows(source)
}

fn read_rows<R: Read, T: serde::de::DeserializeOwned>(source: R) -> Result<Vec<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    rdr.deserialize()
        .map(|r| r.map_err(IngestError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let s = TimeDistanceSeries::new(vec![0.0, 5.0, 12.0], vec![0.0, 30.1, 30.1], 7).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,d_m\n"));
        let rows = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.iter().map(|r| r.d_m).collect::<Vec<_>>(), s.d());
    }

    #[test]
    fn samples_round_trip_exact() {
        let rows = vec![
            SampleRow {
                t_s: 0.0,
                x_m: 0.0,
                v_mps: 0.1 + 0.2,
                a_mps2: -1e-17,
            },
            SampleRow {
                t_s: 0.1,
                x_m: 1.0 / 3.0,
                v_mps: 4.5,
                a_mps2: 2.0,
            },
        ];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"t_s,x_m,v_mps,a_mps2\n"));
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), rows);
    }
}
