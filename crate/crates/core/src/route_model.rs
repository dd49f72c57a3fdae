//! Grouping of AIS records into routes and per-point route context.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::geo::{great_circle_km, initial_bearing_deg};
use crate::ingest::{AisRecord, PortName, Timestamp};

/// Identifier of a [`RoutePoint`], unique within one partitioning call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u32);

/// Route identity: `SHIP|DEPARTURE|ARRIVAL_TIME` for labeled data,
/// `SHIP|DEPARTURE|#n` (n-th trip of the ship) for unlabeled data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouteId(String);

impl RouteId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RouteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePoint {
    pub point_id: PointId,
    pub record: AisRecord,
    /// Position of the record in the parsed input.
    pub source_index: usize,
    pub bearing_deg: f64,
    pub dist_from_departure_km: f64,
    /// Seconds until the route's arrival; `None` on unlabeled routes.
    pub remaining_time_s: Option<i64>,
    pub prev: Option<PointId>,
}

impl RoutePoint {
    /// Reported course, falling back to the derived bearing.
    pub fn course_deg(&self) -> f64 {
        self.record.course_deg.unwrap_or(self.bearing_deg)
    }

    pub fn timestamp(&self) -> Timestamp {
        self.record.timestamp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub route_id: RouteId,
    pub ship_id: String,
    pub departure_port: PortName,
    pub arrival_port: Option<PortName>,
    pub arrival_time: Option<Timestamp>,
    pub points: Vec<RoutePoint>,
}

impl Route {
    pub fn is_labeled(&self) -> bool {
        self.arrival_port.is_some() && self.arrival_time.is_some()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("route {0} has no points")]
    Empty(RouteId),
}

/// Splits records into enriched routes.
///
/// When every record is labeled, routes are keyed on
/// `(ship_id, departure_port, arrival_time)`. Otherwise each ship's records
/// are taken in timestamp order and a new route starts whenever the
/// departure port changes. Routes come out in order of first appearance and
/// point ids are assigned sequentially across all routes.
pub fn partition_routes(records: Vec<AisRecord>) -> Vec<Route> {
    if records.is_empty() {
        return Vec::new();
    }
    let labeled = records.iter().all(AisRecord::is_labeled);
    let groups = if labeled {
        group_labeled(&records)
    } else {
        group_unlabeled(&records)
    };

    let mut slots: Vec<Option<AisRecord>> = records.into_iter().map(Some).collect();
    let mut next_id = 0u32;
    groups
        .into_iter()
        .map(|(route_id, mut members)| {
            // stable: equal timestamps keep input order
            members.sort_by_key(|&i| slots[i].as_ref().expect("unclaimed").timestamp);
            let points: Vec<RoutePoint> = members
                .into_iter()
                .map(|i| {
                    let record = slots[i].take().expect("record in exactly one route");
                    let point_id = PointId(next_id);
                    next_id += 1;
                    RoutePoint {
                        point_id,
                        record,
                        source_index: i,
                        bearing_deg: 0.0,
                        dist_from_departure_km: 0.0,
                        remaining_time_s: None,
                        prev: None,
                    }
                })
                .collect();
            let first = &points[0].record;
            let mut route = Route {
                route_id,
                ship_id: first.ship_id.clone(),
                departure_port: first.departure_port.clone(),
                arrival_port: if labeled {
                    first.arrival_port.clone()
                } else {
                    None
                },
                arrival_time: if labeled { first.arrival_time } else { None },
                points,
            };
            enrich_route(&mut route).expect("grouped routes are non-empty");
            route
        })
        .collect()
}

fn group_labeled(records: &[AisRecord]) -> Vec<(RouteId, Vec<usize>)> {
    let mut index: HashMap<(&str, &PortName, Timestamp), usize> = HashMap::new();
    let mut groups: Vec<(RouteId, Vec<usize>)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let arrival = r.arrival_time.expect("labeled");
        let key = (r.ship_id.as_str(), &r.departure_port, arrival);
        let g = *index.entry(key).or_insert_with(|| {
            groups.push((
                RouteId(format!("{}|{}|{}", r.ship_id, r.departure_port, arrival)),
                Vec::new(),
            ));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups
}

fn group_unlabeled(records: &[AisRecord]) -> Vec<(RouteId, Vec<usize>)> {
    let mut ships: HashMap<&str, usize> = HashMap::new();
    let mut per_ship: Vec<Vec<usize>> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let s = *ships.entry(r.ship_id.as_str()).or_insert_with(|| {
            per_ship.push(Vec::new());
            per_ship.len() - 1
        });
        per_ship[s].push(i);
    }

    let mut groups: Vec<(RouteId, Vec<usize>)> = Vec::new();
    for mut members in per_ship {
        members.sort_by_key(|&i| records[i].timestamp);
        let mut trip = 0usize;
        let mut current: Option<&PortName> = None;
        for i in members {
            let r = &records[i];
            if current != Some(&r.departure_port) {
                current = Some(&r.departure_port);
                groups.push((
                    RouteId(format!("{}|{}|#{}", r.ship_id, r.departure_port, trip)),
                    Vec::new(),
                ));
                trip += 1;
            }
            groups.last_mut().expect("group opened").1.push(i);
        }
    }
    // order of first appearance in the input
    groups.sort_by_key(|(_, m)| m.iter().copied().min());
    groups
}

/// Fills bearing, cumulative distance, remaining time and `prev` links.
/// Points must already be in timestamp order.
pub fn enrich_route(route: &mut Route) -> Result<(), RouteError> {
    if route.points.is_empty() {
        return Err(RouteError::Empty(route.route_id.clone()));
    }
    let arrival = route.arrival_time;
    let mut cumulative = 0.0;
    let mut prev: Option<(PointId, crate::geo::GeoPoint)> = None;
    for p in route.points.iter_mut() {
        let here = p.record.position();
        let fallback = p.record.course_deg.or(p.record.heading_deg).unwrap_or(0.0);
        match prev {
            Some((prev_id, before)) => {
                cumulative += great_circle_km(before, here);
                p.bearing_deg = initial_bearing_deg(before, here).unwrap_or(fallback);
                p.prev = Some(prev_id);
            }
            None => {
                p.bearing_deg = fallback;
                p.prev = None;
            }
        }
        p.dist_from_departure_km = cumulative;
        p.remaining_time_s = arrival.map(|a| (a.0 - p.record.timestamp.0).max(0));
        prev = Some((p.point_id, here));
    }
    Ok(())
}
