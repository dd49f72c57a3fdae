//! Spherical-Earth geometry: great-circle distance, initial bearing and
//! circular angle differences.

use thiserror::Error;

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Two coordinates closer than this (in degrees, per axis) are treated as the
/// same fix.
pub const COINCIDENT_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude out of range: {0}")]
    LatitudeOutOfRange(f64),
    #[error("longitude is not finite: {0}")]
    LongitudeNotFinite(f64),
}

/// A position on the sphere in degrees.
///
/// Latitude is validated, longitude is wrapped into `[-180, 180]` because AIS
/// feeds sometimes report `0..360`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeoError::LatitudeOutOfRange(lat_deg));
        }
        if !lon_deg.is_finite() {
            return Err(GeoError::LongitudeNotFinite(lon_deg));
        }
        Ok(Self {
            lat_deg,
            lon_deg: normalize_lon(lon_deg),
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    /// True when both coordinates agree within [`COINCIDENT_EPS_DEG`].
    pub fn coincides_with(&self, other: &GeoPoint) -> bool {
        (self.lat_deg - other.lat_deg).abs() <= COINCIDENT_EPS_DEG
            && angular_diff_deg(self.lon_deg, other.lon_deg) <= COINCIDENT_EPS_DEG
    }
}

/// Wraps a longitude into `[-180, 180]`. Values already in range are
/// returned bit-for-bit unchanged.
pub fn normalize_lon(lon_deg: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon_deg) {
        lon_deg
    } else {
        (lon_deg + 180.0).rem_euclid(360.0) - 180.0
    }
}

/// Maps any angle into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r + 0.0
    }
}

/// Haversine distance in kilometers.
pub fn great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let half_dphi = (phi2 - phi1) / 2.0;
    let half_dlambda = (b.lon_deg - a.lon_deg).to_radians() / 2.0;
    let h = half_dphi.sin().powi(2) + phi1.cos() * phi2.cos() * half_dlambda.sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Initial great-circle bearing from `from` towards `to`, clockwise from
/// north, in `[0, 360)`.
///
/// Returns `None` (undefined bearing) when the two points coincide.
pub fn initial_bearing_deg(from: GeoPoint, to: GeoPoint) -> Option<f64> {
    if from.coincides_with(&to) {
        return None;
    }
    let phi1 = from.lat_deg.to_radians();
    let phi2 = to.lat_deg.to_radians();
    let dlambda = (to.lon_deg - from.lon_deg).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Some(normalize_deg(y.atan2(x).to_degrees()))
}

/// Smallest absolute difference between two directions, in `[0, 180]`.
pub fn angular_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}
