//! Seeded synthetic AIS datasets.
//!
//! Ports are scattered over a regional box with a minimum angular
//! separation. Each route sails from another port (or an open-sea origin
//! when there is only one port) towards its destination along a great
//! circle bent by a per-route lateral offset, with Gaussian position noise.
//! Timestamps follow path length over speed, so arrival labels are
//! consistent with the track.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geo::{great_circle_km, initial_bearing_deg, normalize_deg, GeoPoint};
use crate::ingest::{write_ais_csv, AisRecord, PortName, Timestamp};

const KNOT_KMH: f64 = 1.852;
/// 2018-01-01T00:00:00Z
const BASE_EPOCH: i64 = 1_514_764_800;
const START_SPREAD_S: i64 = 60 * 86_400;
const PORT_LAT: (f64, f64) = (-40.0, 60.0);
const PORT_LON: (f64, f64) = (-60.0, 60.0);
const PLACEMENT_ATTEMPTS: usize = 10_000;
const PATH_SEGMENTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_ports: usize,
    pub routes_per_port: usize,
    pub min_points: usize,
    pub max_points: usize,
    /// Standard deviation of per-fix position noise, degrees.
    pub noise_sigma_deg: f64,
    /// Standard deviation of the per-route lateral detour at mid-route,
    /// degrees.
    pub detour_sigma_deg: f64,
    pub min_speed_knots: f64,
    pub max_speed_knots: f64,
    pub min_port_separation_deg: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_ports: 5,
            routes_per_port: 40,
            min_points: 20,
            max_points: 60,
            noise_sigma_deg: 0.02,
            detour_sigma_deg: 0.3,
            min_speed_knots: 10.0,
            max_speed_knots: 20.0,
            min_port_separation_deg: 5.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("could not place {0} ports with the requested separation")]
    PortPlacement(usize),
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::InvalidConfig(m.to_string()));
        if self.n_ports == 0 || self.routes_per_port == 0 || self.min_points == 0 {
            return bad("counts must be at least 1");
        }
        if self.min_points > self.max_points {
            return bad("min_points exceeds max_points");
        }
        if !(self.noise_sigma_deg >= 0.0 && self.detour_sigma_deg >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(self.min_speed_knots > 0.0 && self.min_speed_knots <= self.max_speed_knots) {
            return bad("speed range must be positive and ordered");
        }
        if self.min_port_separation_deg.is_nan() || self.min_port_separation_deg < 0.0 {
            return bad("port separation must be non-negative");
        }
        Ok(())
    }
}

/// Unit vector on the sphere.
type V3 = [f64; 3];

fn to_v3(p: GeoPoint) -> V3 {
    let (sl, cl) = p.lat_deg().to_radians().sin_cos();
    let (so, co) = p.lon_deg().to_radians().sin_cos();
    [cl * co, cl * so, sl]
}

fn from_v3(v: V3) -> GeoPoint {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let lat = (v[2] / n).clamp(-1.0, 1.0).asin().to_degrees();
    let lon = v[1].atan2(v[0]).to_degrees();
    GeoPoint::new(lat, lon).expect("unit vector maps to a valid point")
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: V3) -> V3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        [0.0, 0.0, 0.0]
    } else {
        v.map(|x| x / n)
    }
}

/// Great circle from `a` to `b` with a sideways bulge of `detour_rad` at the
/// midpoint.
struct Path {
    a: V3,
    b: V3,
    omega: f64,
    normal: V3,
    detour_rad: f64,
}

impl Path {
    fn new(from: GeoPoint, to: GeoPoint, detour_deg: f64) -> Self {
        let a = to_v3(from);
        let b = to_v3(to);
        let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        Self {
            a,
            b,
            omega: dot.acos(),
            normal: normalized(cross(a, b)),
            detour_rad: detour_deg.to_radians(),
        }
    }

    fn at(&self, t: f64) -> GeoPoint {
        let base = if self.omega < 1e-12 {
            self.a
        } else {
            let s = self.omega.sin();
            let wa = ((1.0 - t) * self.omega).sin() / s;
            let wb = (t * self.omega).sin() / s;
            std::array::from_fn(|i| wa * self.a[i] + wb * self.b[i])
        };
        let off = self.detour_rad * (std::f64::consts::PI * t).sin();
        from_v3(std::array::from_fn(|i| base[i] + off * self.normal[i]))
    }

    fn length_km(&self) -> f64 {
        (0..PATH_SEGMENTS)
            .map(|i| {
                let t0 = i as f64 / PATH_SEGMENTS as f64;
                let t1 = (i + 1) as f64 / PATH_SEGMENTS as f64;
                great_circle_km(self.at(t0), self.at(t1))
            })
            .sum()
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

/// Rounded direction in `[0, 360)`.
fn round_direction(deg: f64) -> f64 {
    normalize_deg(round_to(normalize_deg(deg), 1))
}

fn angular_separation_deg(a: GeoPoint, b: GeoPoint) -> f64 {
    (great_circle_km(a, b) / crate::geo::EARTH_RADIUS_KM).to_degrees()
}

fn place_ports(
    cfg: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GeoPoint>, SyntheticError> {
    let mut ports: Vec<GeoPoint> = Vec::with_capacity(cfg.n_ports);
    while ports.len() < cfg.n_ports {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let lat = rng.random_range(PORT_LAT.0..=PORT_LAT.1);
            let lon = rng.random_range(PORT_LON.0..=PORT_LON.1);
            let cand = GeoPoint::new(round_to(lat, 4), round_to(lon, 4)).expect("box is valid");
            if ports
                .iter()
                .all(|&p| angular_separation_deg(p, cand) >= cfg.min_port_separation_deg)
            {
                ports.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SyntheticError::PortPlacement(cfg.n_ports));
        }
    }
    Ok(ports)
}

/// Generates a labeled dataset, route by route, destinations in port order.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Vec<AisRecord>, SyntheticError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ports = place_ports(cfg, &mut rng)?;
    let names: Vec<PortName> = (0..cfg.n_ports)
        .map(|i| PortName::new(&format!("PORT_{i:02}")).expect("non-empty"))
        .collect();
    let open_sea = PortName::new("OPEN_SEA").expect("non-empty");

    let pos_noise = Normal::new(0.0, cfg.noise_sigma_deg).expect("valid sigma");
    let detour = Normal::new(0.0, cfg.detour_sigma_deg).expect("valid sigma");
    let course_noise = Normal::new(0.0, 3.0).expect("valid sigma");
    let heading_noise = Normal::new(0.0, 2.0).expect("valid sigma");
    let speed_noise = Normal::new(0.0, 0.5).expect("valid sigma");

    let mut records = Vec::new();
    let mut route_no = 0usize;
    for (dest_idx, &dest) in ports.iter().enumerate() {
        for _ in 0..cfg.routes_per_port {
            let (origin, origin_name) = if cfg.n_ports > 1 {
                let mut o = rng.random_range(0..cfg.n_ports - 1);
                if o >= dest_idx {
                    o += 1;
                }
                (ports[o], names[o].clone())
            } else {
                let bearing: f64 = rng.random_range(0.0..360.0);
                (offset_point(dest, bearing, 10.0), open_sea.clone())
            };

            let path = Path::new(origin, dest, detour.sample(&mut rng));
            let length_km = path.length_km();
            let speed = rng.random_range(cfg.min_speed_knots..=cfg.max_speed_knots);
            let duration_s = length_km / (speed * KNOT_KMH) * 3600.0;
            let start = BASE_EPOCH + rng.random_range(0..START_SPREAD_S);
            let arrival = Timestamp(start + duration_s.round() as i64);
            let ship_id = format!("SHIP{route_no:05}");
            let ship_type = rng.random_range(70..=89);
            let draught =
                (rng.random::<f64>() >= 0.1).then(|| round_to(rng.random_range(4.0..15.0), 1));

            let n = rng.random_range(cfg.min_points..=cfg.max_points);
            for i in 0..n {
                let t = if i == 0 {
                    0.0
                } else {
                    (i as f64 + rng.random_range(-0.3..0.3)) / n as f64
                };
                let on_path = path.at(t);
                let ahead = path.at((t + 1e-3).min(1.0));
                let tangent = initial_bearing_deg(on_path, ahead).unwrap_or(0.0);

                let lat = (on_path.lat_deg() + pos_noise.sample(&mut rng)).clamp(-89.9, 89.9);
                let lon = on_path.lon_deg() + pos_noise.sample(&mut rng);
                let fix =
                    GeoPoint::new(round_to(lat, 5), round_to(lon, 5)).expect("clamped latitude");

                let course = tangent + course_noise.sample(&mut rng);
                let heading = course + heading_noise.sample(&mut rng);
                let course_deg = (rng.random::<f64>() >= 0.02).then(|| round_direction(course));
                let heading_deg = (rng.random::<f64>() >= 0.05).then(|| round_direction(heading));
                let speed_knots = round_to((speed + speed_noise.sample(&mut rng)).max(0.0), 1);

                records.push(AisRecord {
                    ship_id: ship_id.clone(),
                    ship_type,
                    speed_knots,
                    lon_deg: round_to(fix.lon_deg(), 5),
                    lat_deg: fix.lat_deg(),
                    course_deg,
                    heading_deg,
                    timestamp: Timestamp(start + (t * duration_s).round() as i64),
                    departure_port: origin_name.clone(),
                    draught,
                    arrival_time: Some(arrival),
                    arrival_port: Some(names[dest_idx].clone()),
                });
            }
            route_no += 1;
        }
    }
    Ok(records)
}

/// Point reached by travelling `dist_deg` of arc from `p` on `bearing_deg`.
fn offset_point(p: GeoPoint, bearing_deg: f64, dist_deg: f64) -> GeoPoint {
    let (phi1, lambda1) = (p.lat_deg().to_radians(), p.lon_deg().to_radians());
    let (theta, delta) = (bearing_deg.to_radians(), dist_deg.to_radians());
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint::new(
        round_to(phi2.to_degrees(), 4),
        round_to(lambda2.to_degrees(), 4),
    )
    .expect("valid destination")
}

/// Generates and writes a labeled dataset in the ingest CSV format.
/// Returns `(routes, points)`.
pub fn write_synthetic_csv<W: Write>(
    cfg: &SyntheticConfig,
    out: &mut W,
) -> io::Result<(usize, usize)> {
    let records = gen_synthetic(cfg).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    write_ais_csv(out, &records, true)?;
    Ok((cfg.n_ports * cfg.routes_per_port, records.len()))
}
