//! Vessel destination and arrival-time prediction from AIS tracks.
//!
//! Training routes are split by arrival port and indexed in per-port ball
//! trees over a five-dimensional embedding (position on the unit sphere plus
//! the sine and cosine of the bearing). A query point is matched against the
//! nearest training point of each port, the candidates are re-ranked with a
//! penalized great-circle similarity, and the winner supplies both the
//! destination and the remaining sailing time. Per-route predictions are
//! smoothed to the longest run of equal raw predictions.
//!
//! Module map:
//!
//! - [`geo`]: haversine distance, initial bearing, angle differences
//! - [`ingest`]: AIS CSV parsing and writing
//! - [`route_model`]: route partitioning and per-point enrichment
//! - [`embedding`]: the weighted 5-D feature map and its metric
//! - [`spatial_index`]: ball tree, KD tree and brute-force nearest neighbor
//! - [`classifier`]: model training, similarity, per-point classification
//! - [`evaluation`]: replay, earliness and arrival-error scoring, synthetic data
//! - [`tuner`]: genetic algorithm over magnitudes and penalties

pub mod classifier;
pub mod embedding;
pub mod evaluation;
pub mod geo;
pub mod ingest;
pub mod route_model;
pub mod spatial_index;
pub mod tuner;

pub use classifier::{train, Model, ModelParams, Penalties, Prediction, RouteState};
pub use embedding::{FeatureWeights, Vec5};
pub use ingest::{parse_ais_csv, AisRecord, PortName, Timestamp};
pub use route_model::{partition_routes, Route, RoutePoint};
