use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use super::{
    column_indices, csv_reader, format_timestamp, parse_timestamp, AvlDoorEvent, IngestError,
    LoadReport,
};

const COLUMNS: [&str; 3] = ["trip_id", "open_at", "close_at"];

/// Reads AVL door-open intervals.
///
/// The result is sorted by `open_at`. Intervals of the same trip that
/// overlap or touch are merged, since both ends are inclusive.
pub fn load_avl_events<R: Read>(source: R) -> Result<LoadReport<AvlDoorEvent>, IngestError> {
    let mut rdr = csv_reader(source);
    let headers = rdr.headers()?.clone();
    let [trip, open, close] = column_indices(&headers, COLUMNS)?;
    let stop = headers.iter().position(|h| h.trim() == "stop_id");

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
                let parsed = (|| {
                    let trip_id = field(trip);
                    if trip_id.is_empty() {
                        return Err("empty trip_id".to_string());
                    }
                    let o = parse_timestamp(field(open))?;
                    let c = parse_timestamp(field(close))?;
                    if c.seconds <= o.seconds {
                        return Err(format!(
                            "close_at {} is not after open_at {}",
                            field(close),
                            field(open)
                        ));
                    }
                    let stop_id = stop
                        .map(field)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string);
                    let truncated = usize::from(o.truncated) + usize::from(c.truncated);
                    Ok((
                        AvlDoorEvent {
                            trip_id: trip_id.to_string(),
                            open_at: o.seconds,
                            close_at: c.seconds,
                            stop_id,
                        },
                        truncated,
                    ))
                })();
                match parsed {
                    Ok((event, truncated)) => {
                        report.truncated_subsecond += truncated;
                        report.records.push(event);
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

    let accepted = report.records.len();
    report.records = merge_door_events(std::mem::take(&mut report.records));
    report.merged = accepted - report.records.len();
    Ok(report)
}

/// Merges overlapping intervals per trip and sorts by `open_at`, then
/// `trip_id`. The earliest interval's `stop_id` is kept.
pub fn merge_door_events(events: Vec<AvlDoorEvent>) -> Vec<AvlDoorEvent> {
    let mut by_trip: BTreeMap<String, Vec<AvlDoorEvent>> = BTreeMap::new();
    for e in events {
        by_trip.entry(e.trip_id.clone()).or_default().push(e);
    }
    let mut out = Vec::new();
    for (_, mut evs) in by_trip {
        evs.sort_by_key(|e| (e.open_at, e.close_at));
        let mut iter = evs.into_iter();
        let Some(mut cur) = iter.next() else { continue };
        for e in iter {
            if e.open_at <= cur.close_at {
                cur.close_at = cur.close_at.max(e.close_at);
            } else {
                out.push(std::mem::replace(&mut cur, e));
            }
        }
        out.push(cur);
    }
    out.sort_by(|a, b| (a.open_at, &a.trip_id).cmp(&(b.open_at, &b.trip_id)));
    out
}

#[derive(Serialize)]
struct OutRow<'a> {
    trip_id: &'a str,
    open_at: String,
    close_at: String,
    stop_id: &'a str,
}

pub fn write_avl_csv<W: Write>(sink: W, events: &[AvlDoorEvent]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(sink);
    if events.is_empty() {
        wtr.write_record(["trip_id", "open_at", "close_at", "stop_id"])?;
    }
    for e in events {
        wtr.serialize(OutRow {
            trip_id: &e.trip_id,
            open_at: format_timestamp(e.open_at),
            close_at: format_timestamp(e.close_at),
            stop_id: e.stop_id.as_deref().unwrap_or(""),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: i64) -> String {
        format_timestamp(1_650_875_000 + s)
    }

    fn load(rows: &[(&str, i64, i64)]) -> LoadReport<AvlDoorEvent> {
        let mut src = String::from("trip_id,open_at,close_at,stop_id\n");
        for (trip, o, c) in rows {
            src.push_str(&format!("{trip},{},{},s\n", ts(*o), ts(*c)));
        }
        load_avl_events(src.as_bytes()).unwrap()
    }

    #[test]
    fn overlapping_intervals_merge() {
        let r = load(&[("t", 10, 20), ("t", 15, 25)]);
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].open_at, 1_650_875_010);
        assert_eq!(r.records[0].close_at, 1_650_875_025);
        assert_eq!(r.merged, 1);
        assert_eq!(r.accepted_rows() + r.rejects.len(), r.rows);
    }

    #[test]
    fn disjoint_intervals_kept() {
        let r = load(&[("t", 30, 40), ("t", 10, 20)]);
        assert_eq!(r.records.len(), 2);
        assert!(r.records[0].open_at < r.records[1].open_at);
    }

    #[test]
    fn other_trips_do_not_merge() {
        let r = load(&[("a", 10, 20), ("b", 15, 25)]);
        assert_eq!(r.records.len(), 2);
    }

    #[test]
    fn degenerate_interval_rejected() {
        let r = load(&[("t", 10, 10), ("t", 30, 40)]);
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.rejects.len(), 1);
        assert_eq!(r.rejects[0].line, 2);
    }

    #[test]
    fn stop_id_column_is_optional() {
        let src = format!("trip_id,open_at,close_at\nt,{},{}\n", ts(0), ts(5));
        let r = load_avl_events(src.as_bytes()).unwrap();
        assert_eq!(r.records[0].stop_id, None);
    }

    proptest! {
        #[test]
        fn merged_output_is_disjoint_and_round_trips(
            raw in proptest::collection::vec((0i64..500, 1i64..60), 0..25)
        ) {
            let rows: Vec<_> = raw.iter().map(|&(o, len)| ("t", o, o + len)).collect();
            let r = load(&rows);
            prop_assert_eq!(r.accepted_rows() + r.rejects.len(), r.rows);
            for w in r.records.windows(2) {
                prop_assert!(w[0].close_at < w[1].open_at);
            }
            let mut buf = Vec::new();
            write_avl_csv(&mut buf, &r.records).unwrap();
            let back = load_avl_events(buf.as_slice()).unwrap();
            prop_assert_eq!(back.records, r.records);
        }
    }
}
