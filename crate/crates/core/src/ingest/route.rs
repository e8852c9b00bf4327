use std::io::Read;

use serde_json::{json, Map, Value};

use super::{IngestError, RouteError, RoutePattern, RouteSegment};
use crate::geo::{polyline_length_m, GeoPoint};

/// Reads a route pattern from a GeoJSON FeatureCollection of LineStrings.
///
/// Each feature carries `segment_id` and a 1-based `sequence`; `length_m` is
/// optional and computed from the geometry when absent.
pub fn load_route_pattern<R: Read>(mut source: R) -> Result<RoutePattern, IngestError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    Ok(parse(&text)?)
}

fn parse(text: &str) -> Result<RoutePattern, RouteError> {
    let root: Value = serde_json::from_str(text).map_err(|e| RouteError::Json(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(RouteError::NotFeatureCollection);
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or(RouteError::NotFeatureCollection)?;

    let mut parsed = Vec::with_capacity(features.len());
    for (index, feature) in features.iter().enumerate() {
        parsed.push(parse_feature(index, feature)?);
    }
    if parsed.is_empty() {
        return Err(RouteError::Empty);
    }
    parsed.sort_by_key(|(seq, _)| *seq);
    for (expected, (found, _)) in (1u64..).zip(&parsed) {
        if *found != expected {
            return Err(RouteError::NonContiguousSequence {
                expected,
                found: *found,
            });
        }
    }

    let pattern_id = root
        .get("pattern_id")
        .and_then(Value::as_str)
        .or_else(|| {
            features[0]
                .get("properties")
                .and_then(|p| p.get("pattern_id"))
                .and_then(Value::as_str)
        })
        .unwrap_or("pattern")
        .to_string();
    RoutePattern::new(pattern_id, parsed.into_iter().map(|(_, s)| s).collect())
}

fn parse_feature(index: usize, feature: &Value) -> Result<(u64, RouteSegment), RouteError> {
    let geometry = feature.get("geometry").unwrap_or(&Value::Null);
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .unwrap_or("null");
    if kind != "LineString" {
        return Err(RouteError::Geometry {
            index,
            found: kind.to_string(),
        });
    }
    let coords = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| RouteError::Coordinates {
            index,
            reason: "missing coordinates".into(),
        })?;
    let mut polyline = Vec::with_capacity(coords.len());
    for c in coords {
        let pair = c.as_array().filter(|a| a.len() >= 2);
        let (lon, lat) = match pair.map(|a| (a[0].as_f64(), a[1].as_f64())) {
            Some((Some(lon), Some(lat))) => (lon, lat),
            _ => {
                return Err(RouteError::Coordinates {
                    index,
                    reason: format!("bad position {c}"),
                })
            }
        };
        let p = GeoPoint::checked(lat, lon).map_err(|e| RouteError::Coordinates {
            index,
            reason: e.to_string(),
        })?;
        polyline.push(p);
    }

    let props = feature.get("properties").and_then(Value::as_object);
    let prop = |name: &str| props.and_then(|p| p.get(name));
    let segment_id = match prop("segment_id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => {
            return Err(RouteError::Property {
                index,
                name: "segment_id",
            })
        }
    };
    let sequence = prop("sequence")
        .and_then(Value::as_u64)
        .filter(|&s| s >= 1)
        .ok_or(RouteError::Property {
            index,
            name: "sequence",
        })?;
    let length_m = match prop("length_m") {
        None | Some(Value::Null) => polyline_length_m(&polyline),
        Some(v) => v.as_f64().ok_or(RouteError::Property {
            index,
            name: "length_m",
        })?,
    };
    Ok((
        sequence,
        RouteSegment {
            segment_id,
            polyline,
            length_m,
        },
    ))
}

/// Serializes a pattern in the format read by [`load_route_pattern`].
pub fn write_route_geojson(pattern: &RoutePattern) -> String {
    let features: Vec<Value> = pattern
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let coords: Vec<Value> = s.polyline.iter().map(|p| json!([p.lon, p.lat])).collect();
            let mut props = Map::new();
            props.insert("segment_id".into(), json!(s.segment_id));
            props.insert("sequence".into(), json!(i + 1));
            props.insert("length_m".into(), json!(s.length_m));
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "LineString", "coordinates": coords},
            })
        })
        .collect();
    let root = json!({
        "type": "FeatureCollection",
        "pattern_id": pattern.pattern_id,
        "features": features,
    });
    serde_json::to_string_pretty(&root).expect("route serializes")
}
