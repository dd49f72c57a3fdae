//! Five-dimensional point embedding: unit-sphere position plus the sine and
//! cosine of the bearing, each axis scaled by its own magnitude.

use thiserror::Error;

use crate::route_model::RoutePoint;

pub const DIMS: usize = 5;

pub type Vec5 = [f64; DIMS];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("feature magnitude {name} = {value} outside [0, 1]")]
pub struct WeightError {
    pub name: &'static str,
    pub value: f64,
}

/// Per-axis magnitudes, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureWeights {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub bearing_sin: f64,
    pub bearing_cos: f64,
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self {
            x: 1.0,
            y: 1.0,
            z: 1.0,
            bearing_sin: 0.25,
            bearing_cos: 0.25,
        }
    }
}

impl FeatureWeights {
    pub fn uniform(m: f64) -> Self {
        Self {
            x: m,
            y: m,
            z: m,
            bearing_sin: m,
            bearing_cos: m,
        }
    }

    pub fn as_array(&self) -> Vec5 {
        [self.x, self.y, self.z, self.bearing_sin, self.bearing_cos]
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        let named = [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("bearing_sin", self.bearing_sin),
            ("bearing_cos", self.bearing_cos),
        ];
        for (name, value) in named {
            if !(0.0..=1.0).contains(&value) {
                return Err(WeightError { name, value });
            }
        }
        Ok(())
    }
}

/// An embedded point together with the id it is reported under by the
/// spatial indexes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector5 {
    pub id: usize,
    pub v: Vec5,
}

pub fn embed(lat_deg: f64, lon_deg: f64, bearing_deg: f64, w: &FeatureWeights) -> Vec5 {
    let (sin_lat, cos_lat) = lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = lon_deg.to_radians().sin_cos();
    let (sin_b, cos_b) = bearing_deg.to_radians().sin_cos();
    [
        w.x * cos_lat * cos_lon,
        w.y * cos_lat * sin_lon,
        w.z * sin_lat,
        w.bearing_sin * sin_b,
        w.bearing_cos * cos_b,
    ]
}

pub fn embed_point(p: &RoutePoint, w: &FeatureWeights) -> Vec5 {
    embed(p.record.lat_deg, p.record.lon_deg, p.bearing_deg, w)
}

/// Euclidean distance. Every index in the crate goes through this function
/// so that distances agree bit-for-bit across structures.
#[inline]
pub fn dist5(u: &Vec5, v: &Vec5) -> f64 {
    let mut acc = 0.0;
    for i in 0..DIMS {
        let d = u[i] - v[i];
        acc += d * d;
    }
    acc.sqrt()
}
