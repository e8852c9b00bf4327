//! Geodesic primitives on the WGS84 sphere approximation.
//!
//! Distances use the haversine formula with the mean Earth radius. Point to
//! polyline projection works in a local equirectangular frame centered on the
//! query point, which is accurate to well under a meter for the tens of meters
//! that separate a GPS fix from the road it belongs to.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Offsets closer than this are treated as ties during projection.
const TIE_EPS_M: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("degenerate polyline: all vertices coincide")]
    DegeneratePolyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point without range checks. Use [`GeoPoint::checked`] for
    /// untrusted input.
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn checked(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LongitudeOutOfRange(lon));
        }
        Ok(Self { lat, lon })
    }

    /// Linear interpolation in latitude/longitude.
    pub fn lerp(self, other: GeoPoint, u: f64) -> GeoPoint {
        GeoPoint::new(
            self.lat + (other.lat - self.lat) * u,
            self.lon + (other.lon - self.lon) * u,
        )
    }

    /// Offsets the point by `north_m` and `east_m` meters using the local
    /// tangent plane.
    pub fn offset_m(self, north_m: f64, east_m: f64) -> GeoPoint {
        let dlat = (north_m / EARTH_RADIUS_M).to_degrees();
        let dlon = (east_m / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        GeoPoint::new(self.lat + dlat, self.lon + dlon)
    }

    /// Point reached by travelling `distance_m` along the great circle with
    /// initial `bearing_deg` (clockwise from north).
    pub fn destination(self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let delta = distance_m / EARTH_RADIUS_M;
        let theta = bearing_deg.to_radians();
        let phi1 = self.lat.to_radians();
        let lambda1 = self.lon.to_radians();
        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lambda2 = lambda1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
        GeoPoint::new(phi2.to_degrees(), lambda2.to_degrees())
    }
}

/// Result of snapping a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub snapped: GeoPoint,
    /// Arc length from the polyline start to `snapped`, over total length.
    pub along_fraction: f64,
    /// Distance from the query point to `snapped`.
    pub offset_m: f64,
    /// Index of the polyline edge holding `snapped`.
    pub edge: usize,
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Sum of haversine edge lengths.
pub fn polyline_length_m(polyline: &[GeoPoint]) -> f64 {
    polyline.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

fn cumulative_lengths(polyline: &[GeoPoint]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(polyline.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in polyline.windows(2) {
        acc += haversine_m(w[0], w[1]);
        cum.push(acc);
    }
    cum
}

fn check_polyline(polyline: &[GeoPoint]) -> Result<Vec<f64>, GeoError> {
    if polyline.len() < 2 {
        return Err(GeoError::TooFewVertices(polyline.len()));
    }
    let cum = cumulative_lengths(polyline);
    if *cum.last().unwrap() <= 0.0 {
        return Err(GeoError::DegeneratePolyline);
    }
    Ok(cum)
}

/// Snaps `p` onto the closest point of `polyline`.
///
/// Among equidistant edges the lowest edge index wins.
pub fn project_onto_polyline(p: GeoPoint, polyline: &[GeoPoint]) -> Result<Projection, GeoError> {
    let cum = check_polyline(polyline)?;
    let total = *cum.last().unwrap();

    let m_per_deg = EARTH_RADIUS_M.to_radians();
    let x_scale = m_per_deg * p.lat.to_radians().cos();
    let local = |q: GeoPoint| ((q.lon - p.lon) * x_scale, (q.lat - p.lat) * m_per_deg);

    let mut best: Option<(usize, f64, f64)> = None;
    for (edge, w) in polyline.windows(2).enumerate() {
        let (ax, ay) = local(w[0]);
        let (bx, by) = local(w[1]);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let u = if len2 == 0.0 {
            0.0
        } else {
            (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
        };
        let (qx, qy) = (ax + u * dx, ay + u * dy);
        let dist = (qx * qx + qy * qy).sqrt();
        match best {
            Some((_, _, best_dist)) if dist >= best_dist - TIE_EPS_M => {}
            _ => best = Some((edge, u, dist)),
        }
    }

    let (edge, u, _) = best.expect("polyline has at least one edge");
    let snapped = polyline[edge].lerp(polyline[edge + 1], u);
    let arc = cum[edge] + u * (cum[edge + 1] - cum[edge]);
    Ok(Projection {
        snapped,
        along_fraction: (arc / total).clamp(0.0, 1.0),
        offset_m: haversine_m(p, snapped),
        edge,
    })
}

/// Inverse of the along-fraction measure used by [`project_onto_polyline`]:
/// the point whose arc length from the start is `fraction` of the total.
pub fn point_at_fraction(polyline: &[GeoPoint], fraction: f64) -> Result<GeoPoint, GeoError> {
    let cum = check_polyline(polyline)?;
    let total = *cum.last().unwrap();
    let target = fraction.clamp(0.0, 1.0) * total;
    let edge = cum
        .partition_point(|&c| c <= target)
        .saturating_sub(1)
        .min(polyline.len() - 2);
    let edge_len = cum[edge + 1] - cum[edge];
    let u = if edge_len > 0.0 {
        ((target - cum[edge]) / edge_len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(polyline[edge].lerp(polyline[edge + 1], u))
}
