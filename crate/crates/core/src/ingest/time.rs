use chrono::{DateTime, NaiveDateTime, Utc};

/// A timestamp reduced to whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedTimestamp {
    pub seconds: i64,
    /// True when a fractional part was dropped.
    pub truncated: bool,
}

/// Parses an ISO-8601 instant. Offsets are honored; strings without an
/// offset are read as UTC. Fractional seconds are truncated toward zero.
pub fn parse_timestamp(raw: &str) -> Result<ParsedTimestamp, String> {
    let raw = raw.trim();
    let (secs, nanos) = if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        (dt.timestamp(), dt.timestamp_subsec_nanos())
    } else {
        let naive = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f"))
            .map_err(|_| format!("invalid timestamp `{raw}`"))?;
        let utc = naive.and_utc();
        (utc.timestamp(), utc.timestamp_subsec_nanos())
    };
    // chrono floors toward negative infinity; move pre-epoch values back to zero.
    let seconds = if nanos > 0 && secs < 0 {
        secs + 1
    } else {
        secs
    };
    Ok(ParsedTimestamp {
        seconds,
        truncated: nanos > 0,
    })
}

/// Formats epoch seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(seconds: i64) -> String {
    DateTime::<Utc>::from_timestamp(seconds, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| seconds.to_string())
}
