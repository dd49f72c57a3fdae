//! Route replay and scoring.
//!
//! A labeled route is fed to the classifier one point at a time, in
//! timestamp order, with a fresh [`RouteState`]. Destination quality is the
//! earliness rate (length of the correct suffix of emitted ports over the
//! number of predictions) and arrival quality is the mean absolute error in
//! minutes over all predictions of the route. Dataset scores are plain means
//! over routes.

mod synthetic;

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

pub use synthetic::{gen_synthetic, write_synthetic_csv, SyntheticConfig, SyntheticError};

use crate::classifier::{Model, Prediction, RouteState};
use crate::ingest::{PortName, Timestamp};
use crate::route_model::{Route, RouteId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no routes to score")]
    NoRoutes,
    #[error("route {0} is not labeled")]
    Unlabeled(RouteId),
}

/// Predictions for every point of `route`, each computed from that point
/// and the route's earlier points only.
pub fn replay_route(model: &Model, route: &Route) -> Vec<Prediction> {
    let mut state = RouteState::new();
    route
        .points
        .iter()
        .map(|p| model.classify_point(&mut state, p))
        .collect()
}

/// Fraction of predictions forming the correct suffix. Empty input scores 0.
pub fn earliness(predictions: &[Prediction], true_port: &PortName) -> f64 {
    earliness_of(predictions.iter().map(|p| &p.port), true_port)
}

/// [`earliness`] over a bare sequence of emitted ports.
pub fn earliness_of<'a, I>(emitted: I, true_port: &PortName) -> f64
where
    I: DoubleEndedIterator<Item = &'a PortName> + ExactSizeIterator,
{
    let total = emitted.len();
    if total == 0 {
        return 0.0;
    }
    let suffix = emitted.rev().take_while(|p| *p == true_port).count();
    suffix as f64 / total as f64
}

/// Mean absolute arrival error in minutes. Empty input scores 0.
pub fn mae_minutes(predictions: &[Prediction], true_arrival: Timestamp) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let total_s: i64 = predictions
        .iter()
        .map(|p| (p.arrival.0 - true_arrival.0).abs())
        .sum();
    total_s as f64 / 60.0 / predictions.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteScore {
    pub route_id: RouteId,
    pub earliness: f64,
    pub mae_minutes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub avg_earliness: f64,
    pub mae_minutes: f64,
    /// In input route order.
    pub per_route: Vec<RouteScore>,
}

impl Scores {
    /// Aggregates per-route scores. Means are summed in sorted order so the
    /// result does not depend on route order.
    pub fn from_routes(per_route: Vec<RouteScore>) -> Result<Self, EvalError> {
        if per_route.is_empty() {
            return Err(EvalError::NoRoutes);
        }
        let avg_earliness = order_free_mean(per_route.iter().map(|r| r.earliness));
        let mae_minutes = order_free_mean(per_route.iter().map(|r| r.mae_minutes));
        Ok(Self {
            avg_earliness,
            mae_minutes,
            per_route,
        })
    }

    /// `route_id,earliness,mae_minutes` rows followed by the summary line.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "route_id,earliness,mae_minutes")?;
        for r in &self.per_route {
            writeln!(
                out,
                "{},{:.6},{:.6}",
                r.route_id, r.earliness, r.mae_minutes
            )?;
        }
        writeln!(out, "{}", self.summary())
    }

    pub fn summary(&self) -> String {
        format!(
            "earliness={:.6} mae_minutes={:.6}",
            self.avg_earliness, self.mae_minutes
        )
    }
}

fn order_free_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn score_route(model: &Model, route: &Route) -> Result<RouteScore, EvalError> {
    let (Some(port), Some(arrival)) = (&route.arrival_port, route.arrival_time) else {
        return Err(EvalError::Unlabeled(route.route_id.clone()));
    };
    let predictions = replay_route(model, route);
    Ok(RouteScore {
        route_id: route.route_id.clone(),
        earliness: earliness(&predictions, port),
        mae_minutes: mae_minutes(&predictions, arrival),
    })
}

/// Replays every route (in parallel) and aggregates the scores.
pub fn score_dataset(model: &Model, routes: &[Route]) -> Result<Scores, EvalError> {
    if routes.is_empty() {
        return Err(EvalError::NoRoutes);
    }
    let per_route = routes
        .par_iter()
        .map(|r| score_route(model, r))
        .collect::<Result<Vec<_>, _>>()?;
    Scores::from_routes(per_route)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train, ModelParams};
    use crate::route_model::{partition_routes, PointId};

    fn port(s: &str) -> PortName {
        PortName::new(s).unwrap()
    }

    fn pred(p: &str, arrival: i64) -> Prediction {
        Prediction {
            port: port(p),
            arrival: Timestamp(arrival),
            raw_port: port(p),
            chosen_point_id: PointId(0),
        }
    }

    fn preds(ports: &[&str]) -> Vec<Prediction> {
        ports.iter().map(|p| pred(p, 0)).collect()
    }

    #[test]
    fn earliness_examples() {
        assert_eq!(earliness(&preds(&["B", "B"]), &port("B")), 1.0);
        assert_eq!(earliness(&preds(&["A", "B", "B", "B"]), &port("B")), 0.75);
        assert_eq!(earliness(&preds(&["B", "B", "A"]), &port("B")), 0.0);
        assert_eq!(earliness(&[], &port("B")), 0.0);
    }

    #[test]
    fn flip_flop_smoothing_benefit() {
        let raw = ["A", "B", "A", "A", "A"].map(port);
        let truth = port("A");
        let mut state = RouteState::new();
        let smoothed: Vec<PortName> = raw
            .iter()
            .map(|p| {
                state.push(p.clone());
                state.longest_run().clone()
            })
            .collect();
        assert_eq!(smoothed, vec![port("A"); 5]);
        assert_eq!(earliness_of(smoothed.iter(), &truth), 1.0);
        assert_eq!(earliness_of(raw.iter(), &truth), 0.6);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(
            mae_minutes(&[pred("A", 100), pred("A", 100)], Timestamp(100)),
            0.0
        );
        assert_eq!(
            mae_minutes(&[pred("A", 700), pred("A", 700)], Timestamp(100)),
            10.0
        );
        assert_eq!(
            mae_minutes(&[pred("A", 100), pred("A", 1300)], Timestamp(100)),
            10.0
        );
        assert_eq!(mae_minutes(&[pred("A", -500)], Timestamp(100)), 10.0);
    }

    fn rs(id: &str, e: f64, m: f64) -> RouteScore {
        RouteScore {
            route_id: RouteId::new(id),
            earliness: e,
            mae_minutes: m,
        }
    }

    #[test]
    fn aggregation() {
        let s = Scores::from_routes(vec![rs("a", 1.0, 0.0), rs("b", 0.5, 30.0)]).unwrap();
        assert_eq!(s.avg_earliness, 0.75);
        assert_eq!(s.mae_minutes, 15.0);
        assert_eq!(
            Scores::from_routes(Vec::new()).unwrap_err(),
            EvalError::NoRoutes
        );

        let vals = [0.1, 0.7, 0.3, 0.9, 0.2, 0.6];
        let fwd: Vec<_> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| rs(&i.to_string(), v, v * 7.0))
            .collect();
        let mut rev = fwd.clone();
        rev.reverse();
        let a = Scores::from_routes(fwd).unwrap();
        let b = Scores::from_routes(rev).unwrap();
        assert_eq!(a.avg_earliness, b.avg_earliness);
        assert_eq!(a.mae_minutes, b.mae_minutes);
    }

    #[test]
    fn self_replay_is_perfect() {
        let cfg = SyntheticConfig {
            n_ports: 3,
            routes_per_port: 4,
            ..SyntheticConfig::default()
        };
        let routes = partition_routes(gen_synthetic(&cfg).unwrap());
        let model = train(&routes, ModelParams::default()).unwrap();
        for r in &routes {
            let p = replay_route(&model, r);
            assert_eq!(p.len(), r.len());
            assert!(p
                .iter()
                .all(|x| Some(&x.raw_port) == r.arrival_port.as_ref()));
        }
        let scores = score_dataset(&model, &routes).unwrap();
        assert_eq!(scores.avg_earliness, 1.0);
        assert_eq!(scores.mae_minutes, 0.0);
        assert_eq!(scores.per_route.len(), routes.len());
        assert_eq!(score_dataset(&model, &[]).unwrap_err(), EvalError::NoRoutes);
    }

    #[test]
    fn replay_has_no_lookahead() {
        let cfg = SyntheticConfig {
            n_ports: 3,
            routes_per_port: 6,
            seed: 11,
            ..SyntheticConfig::default()
        };
        let routes = partition_routes(gen_synthetic(&cfg).unwrap());
        let (train_set, test_set) = routes.split_at(12);
        let model = train(train_set, ModelParams::default()).unwrap();
        for r in test_set {
            let full = replay_route(&model, r);
            for k in [1, r.len() / 2, r.len()] {
                let mut cut = r.clone();
                cut.points.truncate(k);
                assert_eq!(replay_route(&model, &cut), full[..k].to_vec());
            }
        }
    }
}
