//! Flat `key=value` parameter files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are rejected; missing keys keep their defaults.

use std::fmt::Write as _;

use berthcast_core::ModelParams;
use thiserror::Error;

pub const KEYS: [&str; 13] = [
    "magnitude.x",
    "magnitude.y",
    "magnitude.z",
    "magnitude.bearing_sin",
    "magnitude.bearing_cos",
    "penalty.course",
    "penalty.heading",
    "penalty.speed",
    "penalty.dist_from_departure",
    "norm.speed_knots",
    "norm.dist_km",
    "leaf_size",
    "smoothing.enabled",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{0}")]
    Invalid(String),
}

pub fn parse_params(text: &str) -> Result<ModelParams, ParamsError> {
    let mut p = ModelParams::default();
    let mut seen = [false; KEYS.len()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t.split_once('=').ok_or(ParamsError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| ParamsError::UnknownKey {
                line,
                key: key.to_string(),
            })?;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(ParamsError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        let bad = || ParamsError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        let real = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(bad)
        };
        match key {
            "magnitude.x" => p.weights.x = real()?,
            "magnitude.y" => p.weights.y = real()?,
            "magnitude.z" => p.weights.z = real()?,
            "magnitude.bearing_sin" => p.weights.bearing_sin = real()?,
            "magnitude.bearing_cos" => p.weights.bearing_cos = real()?,
            "penalty.course" => p.penalties.course = real()?,
            "penalty.heading" => p.penalties.heading = real()?,
            "penalty.speed" => p.penalties.speed = real()?,
            "penalty.dist_from_departure" => p.penalties.dist = real()?,
            "norm.speed_knots" => p.norm_speed_knots = real()?,
            "norm.dist_km" => p.norm_dist_km = real()?,
            "leaf_size" => p.leaf_size = value.parse().map_err(|_| bad())?,
            "smoothing.enabled" => p.smoothing_enabled = value.parse().map_err(|_| bad())?,
            _ => unreachable!("key checked against KEYS"),
        }
    }
    p.validate()
        .map_err(|e| ParamsError::Invalid(e.to_string()))?;
    Ok(p)
}

/// Every key, in [`KEYS`] order, with floats in shortest round-trip form.
pub fn format_params(p: &ModelParams) -> String {
    let values = [
        p.weights.x.to_string(),
        p.weights.y.to_string(),
        p.weights.z.to_string(),
        p.weights.bearing_sin.to_string(),
        p.weights.bearing_cos.to_string(),
        p.penalties.course.to_string(),
        p.penalties.heading.to_string(),
        p.penalties.speed.to_string(),
        p.penalties.dist.to_string(),
        p.norm_speed_knots.to_string(),
        p.norm_dist_km.to_string(),
        p.leaf_size.to_string(),
        p.smoothing_enabled.to_string(),
    ];
    let mut out = String::new();
    for (k, v) in KEYS.iter().zip(values) {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_when_empty() {
        assert_eq!(parse_params("").unwrap(), ModelParams::default());
        assert_eq!(
            parse_params("# comment\n\n").unwrap(),
            ModelParams::default()
        );
    }

    #[test]
    fn round_trip() {
        let mut p = ModelParams::default();
        p.weights.y = 0.123456789;
        p.penalties.dist = 7.25;
        p.leaf_size = 8;
        p.smoothing_enabled = false;
        assert_eq!(parse_params(&format_params(&p)).unwrap(), p);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let p = parse_params("penalty.speed = 3\nsmoothing.enabled=false\n").unwrap();
        assert_eq!(p.penalties.speed, 3.0);
        assert!(!p.smoothing_enabled);
        assert_eq!(p.weights, ModelParams::default().weights);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            parse_params("magnitude.w=1").unwrap_err(),
            ParamsError::UnknownKey {
                line: 1,
                key: "magnitude.w".into()
            }
        );
        assert!(matches!(
            parse_params("leaf_size=1\nleaf_size=2"),
            Err(ParamsError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_params("leaf_size"),
            Err(ParamsError::Syntax { line: 1 })
        ));
        assert!(matches!(
            parse_params("norm.dist_km=abc"),
            Err(ParamsError::BadValue { .. })
        ));
        assert!(matches!(
            parse_params("magnitude.x=1.5"),
            Err(ParamsError::Invalid(_))
        ));
        assert!(matches!(
            parse_params("norm.speed_knots=0"),
            Err(ParamsError::Invalid(_))
        ));
        assert!(matches!(
            parse_params("smoothing.enabled=yes"),
            Err(ParamsError::BadValue { .. })
        ));
    }
}
