//! Unit conversions. Everything internal is meters and seconds.

/// Exact definition: 1 mph = 0.44704 m/s.
pub const MPS_PER_MPH: f64 = 0.44704;

/// 1 mph/s expressed in m/s².
pub const MPS2_PER_MPHPS: f64 = MPS_PER_MPH;

pub fn mph_to_mps(mph: f64) -> f64 {
    mph * MPS_PER_MPH
}

pub fn mps_to_mph(mps: f64) -> f64 {
    mps / MPS_PER_MPH
}

pub fn mphps_to_mps2(mphps: f64) -> f64 {
    mphps * MPS2_PER_MPHPS
}
