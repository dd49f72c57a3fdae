//! Destination and arrival-time prediction.
//!
//! Training points are partitioned by arrival port with one ball tree per
//! port. A query point is embedded, the nearest training point of every port
//! is retrieved, and the candidates are re-ranked with [`similarity`]: the
//! great-circle distance scaled by one `(1 + penalty * difference)` factor
//! per attribute. The winner's port is the raw prediction and its remaining
//! route time gives the arrival estimate. The emitted port is smoothed to
//! the value of the longest run of equal raw predictions seen so far on the
//! route.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::{embed_point, FeatureVector5, FeatureWeights, WeightError};
use crate::geo::{angular_diff_deg, great_circle_km};
use crate::ingest::{PortName, Timestamp};
use crate::route_model::{PointId, Route, RoutePoint};
use crate::spatial_index::{BallTree, IndexError, NearestNeighborIndex, DEFAULT_LEAF_SIZE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub course: f64,
    pub heading: f64,
    pub speed: f64,
    pub dist: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            course: 1.0,
            heading: 0.5,
            speed: 0.25,
            dist: 0.5,
        }
    }
}

impl Penalties {
    pub const ZERO: Penalties = Penalties {
        course: 0.0,
        heading: 0.0,
        speed: 0.0,
        dist: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub weights: FeatureWeights,
    pub penalties: Penalties,
    pub norm_speed_knots: f64,
    pub norm_dist_km: f64,
    pub leaf_size: usize,
    pub smoothing_enabled: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            weights: FeatureWeights::default(),
            penalties: Penalties::default(),
            norm_speed_knots: 50.0,
            norm_dist_km: 100.0,
            leaf_size: DEFAULT_LEAF_SIZE,
            smoothing_enabled: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        self.weights.validate()?;
        let p = &self.penalties;
        for (name, value) in [
            ("course", p.course),
            ("heading", p.heading),
            ("speed", p.speed),
            ("dist", p.dist),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ClassifierError::InvalidParam(format!(
                    "penalty {name} = {value}"
                )));
            }
        }
        for (name, value) in [
            ("speed normalizer", self.norm_speed_knots),
            ("distance normalizer", self.norm_dist_km),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ClassifierError::InvalidParam(format!("{name} = {value}")));
            }
        }
        if self.leaf_size == 0 {
            return Err(ClassifierError::InvalidParam("leaf size = 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("no labeled training routes")]
    NoTrainingRoutes,
    #[error("training route {0} is not labeled")]
    UnlabeledRoute(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("empty prediction history")]
    EmptyHistory,
}

/// Training points of one arrival port and their ball tree. Tree ids are
/// indexes into `points`, which is kept in ascending `PointId` order so that
/// the tree's smallest-id tie rule matches the global one.
#[derive(Debug, Clone)]
pub struct PortIndex {
    pub port: PortName,
    pub points: Vec<RoutePoint>,
    tree: BallTree,
}

impl PortIndex {
    pub fn tree(&self) -> &BallTree {
        &self.tree
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    ports: Vec<PortIndex>,
}

pub fn train(routes: &[Route], params: ModelParams) -> Result<Model, ClassifierError> {
    params.validate()?;
    if routes.is_empty() {
        return Err(ClassifierError::NoTrainingRoutes);
    }
    let mut by_port: BTreeMap<PortName, Vec<RoutePoint>> = BTreeMap::new();
    for route in routes {
        let port = match (&route.arrival_port, route.arrival_time) {
            (Some(p), Some(_)) => p.clone(),
            _ => return Err(ClassifierError::UnlabeledRoute(route.route_id.to_string())),
        };
        by_port
            .entry(port)
            .or_default()
            .extend(route.points.iter().cloned());
    }

    let ports = by_port
        .into_par_iter()
        .map(|(port, mut points)| {
            points.sort_by_key(|p| p.point_id);
            let vectors = points
                .iter()
                .enumerate()
                .map(|(id, p)| FeatureVector5 {
                    id,
                    v: embed_point(p, &params.weights),
                })
                .collect();
            let tree = BallTree::build(vectors, params.leaf_size)?;
            Ok(PortIndex { port, points, tree })
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    Ok(Model { params, ports })
}

#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub port: &'a PortName,
    pub point: &'a RoutePoint,
    pub dist5: f64,
}

impl Model {
    pub fn ports(&self) -> &[PortIndex] {
        &self.ports
    }

    pub fn total_points(&self) -> usize {
        self.ports.iter().map(|p| p.points.len()).sum()
    }

    /// The exact nearest training point of every port, in port-name order.
    pub fn candidates_per_port(&self, q: &RoutePoint) -> Vec<Candidate<'_>> {
        let v = embed_point(q, &self.params.weights);
        self.ports
            .par_iter()
            .map(|idx| {
                let n = idx.tree.nearest(&v);
                Candidate {
                    port: &idx.port,
                    point: &idx.points[n.id],
                    dist5: n.distance,
                }
            })
            .collect()
    }

    /// Classifies the next point of a route and records the raw prediction
    /// in `state`.
    pub fn classify_point(&self, state: &mut RouteState, q: &RoutePoint) -> Prediction {
        let candidates = self.candidates_per_port(q);
        let (winner, _) = candidates
            .iter()
            .map(|c| (c, similarity(q, c.point, &self.params)))
            .min_by(|(a, sa), (b, sb)| {
                sa.total_cmp(sb)
                    .then(a.point.point_id.cmp(&b.point.point_id))
            })
            .expect("a trained model has at least one port");

        let raw_port = winner.port.clone();
        state.push(raw_port.clone());
        let port = if self.params.smoothing_enabled {
            state.longest_run().clone()
        } else {
            raw_port.clone()
        };
        let remaining = winner.point.remaining_time_s.unwrap_or(0);
        Prediction {
            port,
            arrival: q.timestamp().plus_seconds(remaining),
            raw_port,
            chosen_point_id: winner.point.point_id,
        }
    }
}

/// Dissimilarity of a query point to a candidate; lower is more similar.
///
/// `gcd(q, c) * (1 + pc*dc) * (1 + ph*dh) * (1 + ps*ds) * (1 + pd*dd)` where
/// each `d` is a difference normalized to `[0, 1]`: course and heading by
/// 180 degrees, speed and distance-from-departure by their normalizers
/// (clamped). A heading missing on either side contributes no penalty.
pub fn similarity(q: &RoutePoint, c: &RoutePoint, params: &ModelParams) -> f64 {
    let gcd = great_circle_km(q.record.position(), c.record.position());
    let p = &params.penalties;
    let d_course = angular_diff_deg(q.course_deg(), c.course_deg()) / 180.0;
    let d_heading = match (q.record.heading_deg, c.record.heading_deg) {
        (Some(a), Some(b)) => angular_diff_deg(a, b) / 180.0,
        _ => 0.0,
    };
    let d_speed =
        ((q.record.speed_knots - c.record.speed_knots).abs() / params.norm_speed_knots).min(1.0);
    let d_dist = ((q.dist_from_departure_km - c.dist_from_departure_km).abs()
        / params.norm_dist_km)
        .min(1.0);
    gcd * (1.0 + p.course * d_course)
        * (1.0 + p.heading * d_heading)
        * (1.0 + p.speed * d_speed)
        * (1.0 + p.dist * d_dist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Emitted (smoothed) destination.
    pub port: PortName,
    pub arrival: Timestamp,
    pub raw_port: PortName,
    pub chosen_point_id: PointId,
}

/// Raw prediction history of one query route with incremental bookkeeping
/// for the longest run.
#[derive(Debug, Clone, Default)]
pub struct RouteState {
    history: Vec<PortName>,
    current_start: usize,
    best_start: usize,
    best_len: usize,
}

impl RouteState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn history(&self) -> &[PortName] {
        &self.history
    }

    pub fn push(&mut self, port: PortName) {
        let n = self.history.len();
        if n == 0 || self.history[n - 1] != port {
            self.current_start = n;
        }
        self.history.push(port);
        let current_len = self.history.len() - self.current_start;
        // strictly longer: the earlier run keeps the lead on ties
        if current_len > self.best_len {
            self.best_start = self.current_start;
            self.best_len = current_len;
        }
    }

    /// Value of the longest run so far. Panics on an empty history.
    pub fn longest_run(&self) -> &PortName {
        &self.history[self.best_start]
    }
}

/// Value of the longest maximal run of equal consecutive entries; ties go
/// to the earliest such run, so a challenger must strictly outgrow the
/// current leader before the output changes.
pub fn longest_run<T: PartialEq>(history: &[T]) -> Result<&T, ClassifierError> {
    let mut best: Option<(&T, usize)> = None;
    let mut i = 0;
    while i < history.len() {
        let mut j = i + 1;
        while j < history.len() && history[j] == history[i] {
            j += 1;
        }
        if best.is_none_or(|(_, len)| j - i > len) {
            best = Some((&history[i], j - i));
        }
        i = j;
    }
    best.map(|(v, _)| v).ok_or(ClassifierError::EmptyHistory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AisRecord;
    use crate::route_model::partition_routes;
    use crate::spatial_index::brute_nearest;
    use proptest::prelude::*;

    fn port(s: &str) -> PortName {
        PortName::new(s).unwrap()
    }

    fn rec(ship: &str, ts: i64, lat: f64, lon: f64, arrival: i64, to: &str) -> AisRecord {
        AisRecord {
            ship_id: ship.into(),
            ship_type: 70,
            speed_knots: 12.0,
            lon_deg: lon,
            lat_deg: lat,
            course_deg: None,
            heading_deg: None,
            timestamp: Timestamp(ts),
            departure_port: port("DEP"),
            draught: None,
            arrival_time: Some(Timestamp(arrival)),
            arrival_port: Some(port(to)),
        }
    }

    fn straight(ship: &str, lat: f64, lon0: f64, n: usize, to: &str) -> Vec<AisRecord> {
        (0..n)
            .map(|i| {
                rec(
                    ship,
                    i as i64 * 600,
                    lat,
                    lon0 + i as f64 * 0.1,
                    n as i64 * 600,
                    to,
                )
            })
            .collect()
    }

    fn point(lat: f64, lon: f64) -> RoutePoint {
        let routes = partition_routes(vec![rec("q", 0, lat, lon, 0, "X")]);
        routes[0].points[0].clone()
    }

    #[test]
    fn train_builds_one_tree_per_port() {
        let mut recs = straight("a", 0.0, 0.0, 5, "A");
        recs.extend(straight("b", 5.0, 0.0, 7, "B"));
        let routes = partition_routes(recs.clone());
        let model = train(&routes, ModelParams::default()).unwrap();
        let sizes: Vec<_> = model
            .ports()
            .iter()
            .map(|p| (p.port.as_str(), p.points.len()))
            .collect();
        assert_eq!(sizes, vec![("A", 5), ("B", 7)]);

        recs.extend(straight("c", 10.0, 0.0, 3, "A"));
        let routes = partition_routes(recs);
        let model = train(&routes, ModelParams::default()).unwrap();
        assert_eq!(model.ports().len(), 2);
        assert_eq!(model.ports()[0].points.len(), 8);
        assert_eq!(model.total_points(), 15);
    }

    #[test]
    fn train_errors() {
        assert_eq!(
            train(&[], ModelParams::default()).unwrap_err(),
            ClassifierError::NoTrainingRoutes
        );
        let mut r = rec("u", 0, 0.0, 0.0, 0, "A");
        r.arrival_port = None;
        r.arrival_time = None;
        let routes = partition_routes(vec![r]);
        assert!(matches!(
            train(&routes, ModelParams::default()),
            Err(ClassifierError::UnlabeledRoute(_))
        ));
        let mut bad = ModelParams::default();
        bad.penalties.speed = -1.0;
        let routes = partition_routes(straight("a", 0.0, 0.0, 2, "A"));
        assert!(matches!(
            train(&routes, bad),
            Err(ClassifierError::InvalidParam(_))
        ));
    }

    #[test]
    fn candidates_are_exact_per_port() {
        let mut recs = straight("a", 0.0, 0.0, 50, "A");
        recs.extend(straight("b", 1.0, 0.0, 50, "B"));
        recs.extend(straight("c", 2.0, 0.0, 50, "C"));
        let routes = partition_routes(recs);
        let params = ModelParams {
            leaf_size: 4,
            ..ModelParams::default()
        };
        let model = train(&routes, params).unwrap();
        let q = routes[0].points[17].clone();
        let cands = model.candidates_per_port(&q);
        assert_eq!(cands.len(), 3);
        assert_eq!(cands[0].port.as_str(), "A");
        assert_eq!(cands[0].dist5, 0.0);
        assert_eq!(cands[0].point.point_id, q.point_id);
        for (idx, cand) in model.ports().iter().zip(&cands) {
            let vectors: Vec<_> = idx
                .points
                .iter()
                .enumerate()
                .map(|(id, p)| FeatureVector5 {
                    id,
                    v: embed_point(p, &model.params.weights),
                })
                .collect();
            let want = brute_nearest(&vectors, &embed_point(&q, &model.params.weights)).unwrap();
            assert_eq!(idx.points[want.id].point_id, cand.point.point_id);
            assert_eq!(want.distance, cand.dist5);
        }
    }

    #[test]
    fn similarity_examples() {
        let q = point(0.0, 0.0);
        let mut c = point(0.0, 1.0);
        let zero = ModelParams {
            penalties: Penalties::ZERO,
            ..ModelParams::default()
        };
        let gcd = great_circle_km(q.record.position(), c.record.position());
        assert_eq!(similarity(&q, &c, &zero), gcd);
        assert_eq!(similarity(&q, &q, &ModelParams::default()), 0.0);

        // hand evaluation: gcd scaled to 100 km, 90 degree course difference
        let mut q2 = q.clone();
        q2.record.course_deg = Some(0.0);
        c.record.course_deg = Some(90.0);
        let course_only = ModelParams {
            penalties: Penalties {
                course: 1.0,
                ..Penalties::ZERO
            },
            ..ModelParams::default()
        };
        let s = similarity(&q2, &c, &course_only);
        assert!((s / gcd * 100.0 - 150.0).abs() < 1e-9);
    }

    #[test]
    fn missing_heading_is_not_penalized() {
        let mut q = point(0.0, 0.0);
        let mut c = point(0.0, 1.0);
        let heading_only = ModelParams {
            penalties: Penalties {
                heading: 5.0,
                ..Penalties::ZERO
            },
            ..ModelParams::default()
        };
        q.record.heading_deg = Some(0.0);
        let base = similarity(&q, &c, &heading_only);
        c.record.heading_deg = Some(180.0);
        assert!((similarity(&q, &c, &heading_only) - base * 6.0).abs() < 1e-9);
    }

    #[test]
    fn longest_run_examples() {
        assert_eq!(longest_run(&["A"]).unwrap(), &"A");
        assert_eq!(longest_run(&["A", "A", "B"]).unwrap(), &"A");
        assert_eq!(longest_run(&["A", "A", "B", "B"]).unwrap(), &"A");
        assert_eq!(longest_run(&["A", "A", "B", "B", "B"]).unwrap(), &"B");
        assert_eq!(longest_run(&["A", "B", "A", "A", "A"]).unwrap(), &"A");
        assert_eq!(longest_run(&["A", "B"]).unwrap(), &"A");
        assert_eq!(longest_run(&["A", "B", "B", "B"]).unwrap(), &"B");
        assert_eq!(
            longest_run::<&str>(&[]).unwrap_err(),
            ClassifierError::EmptyHistory
        );
    }

    #[test]
    fn classify_first_point_and_arrival() {
        let mut recs = straight("a", 0.0, 0.0, 5, "A");
        recs.extend(straight("b", 5.0, 0.0, 5, "B"));
        let routes = partition_routes(recs);
        let model = train(&routes, ModelParams::default()).unwrap();
        let mut q = routes[1].points[2].clone();
        let remaining = q.remaining_time_s.unwrap();
        q.record.timestamp = Timestamp(1000);
        let mut state = RouteState::new();
        let pred = model.classify_point(&mut state, &q);
        assert_eq!(pred.raw_port, port("B"));
        assert_eq!(pred.port, port("B"));
        assert_eq!(pred.arrival, Timestamp(1000 + remaining));
        assert_eq!(state.history().len(), 1);
    }

    #[test]
    fn arrival_follows_winner_when_smoothing_overrides() {
        let mut recs = straight("a", 0.0, 0.0, 5, "A");
        recs.extend(straight("b", 5.0, 0.0, 5, "B"));
        let routes = partition_routes(recs);
        let model = train(&routes, ModelParams::default()).unwrap();
        let mut state = RouteState::new();
        for p in &routes[0].points[..3] {
            model.classify_point(&mut state, p);
        }
        let q = &routes[1].points[1];
        let pred = model.classify_point(&mut state, q);
        assert_eq!(pred.raw_port, port("B"));
        assert_eq!(pred.port, port("A"));
        assert_eq!(pred.chosen_point_id, q.point_id);
        assert_eq!(pred.arrival, routes[1].arrival_time.unwrap());
    }

    fn history() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..3, 1..40)
    }

    proptest! {
        #[test]
        fn incremental_state_matches_longest_run(h in history()) {
            let mut state = RouteState::new();
            for (i, &x) in h.iter().enumerate() {
                state.push(port(&format!("P{x}")));
                let want = longest_run(&h[..=i]).unwrap();
                prop_assert_eq!(state.longest_run(), &port(&format!("P{want}")));
            }
        }

        #[test]
        fn smoothing_locks_once_dominant(prefix in history(), tail in 1usize..20) {
            // Append the current longest-run value until it strictly leads.
            let mut h = prefix.clone();
            let lead = *longest_run(&h).unwrap();
            let longest = {
                let mut best = 0;
                let mut run = 0;
                for i in 0..h.len() {
                    run = if i > 0 && h[i] == h[i - 1] { run + 1 } else { 1 };
                    best = best.max(run);
                }
                best
            };
            h.extend(std::iter::repeat_n(lead, longest + 1));
            let locked = *longest_run(&h).unwrap();
            prop_assert_eq!(locked, lead);
            for _ in 0..tail {
                h.push(lead);
                prop_assert_eq!(*longest_run(&h).unwrap(), locked);
            }
        }

        #[test]
        fn penalties_are_monotone(
            lat in -10.0..10.0f64, lon in -10.0..10.0f64,
            course in 0.0..360.0f64, speed in 0.0..30.0f64,
            which in 0usize..4, bump in 0.0..5.0f64,
        ) {
            let mut q = point(0.0, 0.0);
            q.record.course_deg = Some(10.0);
            q.record.heading_deg = Some(20.0);
            let mut c = point(lat, lon);
            c.record.course_deg = Some(course);
            c.record.heading_deg = Some(course);
            c.record.speed_knots = speed;
            c.dist_from_departure_km = lat.abs() * 50.0;
            let base = ModelParams::default();
            let mut more = base;
            match which {
                0 => more.penalties.course += bump,
                1 => more.penalties.heading += bump,
                2 => more.penalties.speed += bump,
                _ => more.penalties.dist += bump,
            }
            prop_assert!(similarity(&q, &c, &more) >= similarity(&q, &c, &base));
        }
    }
}
