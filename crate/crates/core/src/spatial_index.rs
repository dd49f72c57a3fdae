//! Exact nearest-neighbor search over [`FeatureVector5`] sets.
//!
//! [`BallTree`] is the index used for classification. [`KdTree`] and
//! [`BruteForce`] exist for benchmarking and as oracles. All three return
//! the point at minimal [`dist5`] and break distance ties by the smallest
//! id, so their answers are interchangeable.

use std::cmp::Ordering;

use thiserror::Error;

use crate::embedding::{dist5, FeatureVector5, Vec5, DIMS};

pub const DEFAULT_LEAF_SIZE: usize = 32;

// Lower bounds are compared against the current best with this much slack
// so that rounding in `dist(q, centroid) - radius` never prunes a point that
// would tie the best distance exactly.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("cannot index an empty point set")]
    Empty,
    #[error("leaf size must be at least 1")]
    InvalidLeafSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl Neighbor {
    /// Whether `self` should replace `best`: strictly closer, or equally
    /// close with a smaller id.
    #[inline]
    fn beats(&self, best: &Neighbor) -> bool {
        match self.distance.total_cmp(&best.distance) {
            Ordering::Less => true,
            Ordering::Equal => self.id < best.id,
            Ordering::Greater => false,
        }
    }
}

const NO_NEIGHBOR: Neighbor = Neighbor {
    id: usize::MAX,
    distance: f64::INFINITY,
};

/// Counters collected by an instrumented search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub visited_nodes: usize,
    pub visited_leaves: usize,
    pub distance_evals: usize,
}

pub trait NearestNeighborIndex: Send + Sync {
    fn nearest(&self, q: &Vec5) -> Neighbor;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Linear scan over `points`. `None` only for an empty slice.
pub fn brute_nearest(points: &[FeatureVector5], q: &Vec5) -> Option<Neighbor> {
    let mut best = NO_NEIGHBOR;
    for p in points {
        let cand = Neighbor {
            id: p.id,
            distance: dist5(&p.v, q),
        };
        if cand.beats(&best) {
            best = cand;
        }
    }
    (!points.is_empty()).then_some(best)
}

pub struct BruteForce {
    points: Vec<FeatureVector5>,
}

impl BruteForce {
    pub fn new(points: Vec<FeatureVector5>) -> Result<Self, IndexError> {
        if points.is_empty() {
            return Err(IndexError::Empty);
        }
        Ok(Self { points })
    }
}

impl NearestNeighborIndex for BruteForce {
    fn nearest(&self, q: &Vec5) -> Neighbor {
        brute_nearest(&self.points, q).expect("non-empty by construction")
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

/// Index range of `points` covered by a node, plus its children.
#[derive(Debug, Clone)]
struct BallNode {
    centroid: Vec5,
    radius: f64,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Static ball tree. Nodes are split on the dimension of largest spread at
/// the median until they hold at most `leaf_size` points.
#[derive(Debug, Clone)]
pub struct BallTree {
    points: Vec<FeatureVector5>,
    nodes: Vec<BallNode>,
    leaf_size: usize,
}

impl BallTree {
    pub fn build(mut points: Vec<FeatureVector5>, leaf_size: usize) -> Result<Self, IndexError> {
        if points.is_empty() {
            return Err(IndexError::Empty);
        }
        if leaf_size == 0 {
            return Err(IndexError::InvalidLeafSize);
        }
        let n = points.len();
        let mut nodes = Vec::with_capacity(2 * n.div_ceil(leaf_size));
        build_ball(&mut nodes, &mut points, 0, n, leaf_size);
        Ok(Self {
            points,
            nodes,
            leaf_size,
        })
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nearest_with_stats(&self, q: &Vec5) -> (Neighbor, SearchStats) {
        let mut best = NO_NEIGHBOR;
        let mut stats = SearchStats::default();
        let lb = self.lower_bound(0, q);
        self.search(0, lb, q, &mut best, &mut stats);
        (best, stats)
    }

    #[inline]
    fn lower_bound(&self, node: usize, q: &Vec5) -> f64 {
        let n = &self.nodes[node];
        (dist5(&n.centroid, q) - n.radius).max(0.0)
    }

    fn search(&self, node: usize, lb: f64, q: &Vec5, best: &mut Neighbor, stats: &mut SearchStats) {
        if lb > best.distance + PRUNE_SLACK {
            return;
        }
        stats.visited_nodes += 1;
        let n = &self.nodes[node];
        match n.children {
            None => {
                stats.visited_leaves += 1;
                for p in &self.points[n.start..n.end] {
                    stats.distance_evals += 1;
                    let cand = Neighbor {
                        id: p.id,
                        distance: dist5(&p.v, q),
                    };
                    if cand.beats(best) {
                        *best = cand;
                    }
                }
            }
            Some((left, right)) => {
                let lb_left = self.lower_bound(left, q);
                let lb_right = self.lower_bound(right, q);
                if lb_left <= lb_right {
                    self.search(left, lb_left, q, best, stats);
                    self.search(right, lb_right, q, best, stats);
                } else {
                    self.search(right, lb_right, q, best, stats);
                    self.search(left, lb_left, q, best, stats);
                }
            }
        }
    }

    /// Checks that every point lies inside each ball containing it and that
    /// leaves respect the leaf size. Used by tests and invariant sweeps.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0usize; self.points.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for p in &self.points[n.start..n.end] {
                let d = dist5(&n.centroid, &p.v);
                if d > n.radius + 1e-9 {
                    return Err(format!(
                        "node {i}: point {} at {d} outside radius {}",
                        p.id, n.radius
                    ));
                }
            }
            match n.children {
                None => {
                    if n.end - n.start > self.leaf_size {
                        return Err(format!("leaf {i} holds {} points", n.end - n.start));
                    }
                    for slot in &mut seen[n.start..n.end] {
                        *slot += 1;
                    }
                }
                Some((l, r)) => {
                    let (l, r) = (&self.nodes[l], &self.nodes[r]);
                    if l.start != n.start || l.end != r.start || r.end != n.end {
                        return Err(format!("node {i}: children do not partition the range"));
                    }
                }
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err("a point is not in exactly one leaf".into());
        }
        Ok(())
    }
}

impl NearestNeighborIndex for BallTree {
    fn nearest(&self, q: &Vec5) -> Neighbor {
        self.nearest_with_stats(q).0
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

fn build_ball(
    nodes: &mut Vec<BallNode>,
    points: &mut [FeatureVector5],
    start: usize,
    end: usize,
    leaf_size: usize,
) -> usize {
    let slice = &points[start..end];
    let mut centroid = [0.0; DIMS];
    for p in slice {
        for (c, x) in centroid.iter_mut().zip(&p.v) {
            *c += x;
        }
    }
    let inv = 1.0 / slice.len() as f64;
    for c in centroid.iter_mut() {
        *c *= inv;
    }
    let radius = slice
        .iter()
        .map(|p| dist5(&centroid, &p.v))
        .fold(0.0, f64::max);

    let idx = nodes.len();
    nodes.push(BallNode {
        centroid,
        radius,
        start,
        end,
        children: None,
    });
    if end - start <= leaf_size {
        return idx;
    }

    let dim = widest_dimension(&points[start..end]);
    let mid = start + (end - start) / 2;
    split_at_median(&mut points[start..end], dim, mid - start);
    let left = build_ball(nodes, points, start, mid, leaf_size);
    let right = build_ball(nodes, points, mid, end, leaf_size);
    nodes[idx].children = Some((left, right));
    idx
}

fn widest_dimension(points: &[FeatureVector5]) -> usize {
    let mut lo = [f64::INFINITY; DIMS];
    let mut hi = [f64::NEG_INFINITY; DIMS];
    for p in points {
        for d in 0..DIMS {
            lo[d] = lo[d].min(p.v[d]);
            hi[d] = hi[d].max(p.v[d]);
        }
    }
    // first dimension wins ties
    let mut best = 0;
    for d in 1..DIMS {
        if hi[d] - lo[d] > hi[best] - lo[best] {
            best = d;
        }
    }
    best
}

/// Total order on (coordinate, id), which makes the partition independent of
/// the selection algorithm's internals.
fn split_at_median(points: &mut [FeatureVector5], dim: usize, k: usize) {
    points.select_nth_unstable_by(k, |a, b| {
        a.v[dim].total_cmp(&b.v[dim]).then(a.id.cmp(&b.id))
    });
}

#[derive(Debug, Clone)]
struct KdNode {
    start: usize,
    end: usize,
    split: Option<KdSplit>,
}

#[derive(Debug, Clone)]
struct KdSplit {
    dim: usize,
    value: f64,
    left: usize,
    right: usize,
}

/// Static KD tree with the same split rule as [`BallTree`]; pruning uses the
/// distance to the splitting hyperplane.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<FeatureVector5>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn build(mut points: Vec<FeatureVector5>, leaf_size: usize) -> Result<Self, IndexError> {
        if points.is_empty() {
            return Err(IndexError::Empty);
        }
        if leaf_size == 0 {
            return Err(IndexError::InvalidLeafSize);
        }
        let n = points.len();
        let mut nodes = Vec::new();
        build_kd(&mut nodes, &mut points, 0, n, leaf_size);
        Ok(Self { points, nodes })
    }

    fn search(&self, node: usize, q: &Vec5, best: &mut Neighbor) {
        let n = &self.nodes[node];
        match &n.split {
            None => {
                for p in &self.points[n.start..n.end] {
                    let cand = Neighbor {
                        id: p.id,
                        distance: dist5(&p.v, q),
                    };
                    if cand.beats(best) {
                        *best = cand;
                    }
                }
            }
            Some(s) => {
                let delta = q[s.dim] - s.value;
                // left holds coordinates <= value, right holds >= value
                let (near, far) = if delta <= 0.0 {
                    (s.left, s.right)
                } else {
                    (s.right, s.left)
                };
                self.search(near, q, best);
                if delta.abs() <= best.distance + PRUNE_SLACK {
                    self.search(far, q, best);
                }
            }
        }
    }
}

impl NearestNeighborIndex for KdTree {
    fn nearest(&self, q: &Vec5) -> Neighbor {
        let mut best = NO_NEIGHBOR;
        self.search(0, q, &mut best);
        best
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

fn build_kd(
    nodes: &mut Vec<KdNode>,
    points: &mut [FeatureVector5],
    start: usize,
    end: usize,
    leaf_size: usize,
) -> usize {
    let idx = nodes.len();
    nodes.push(KdNode {
        start,
        end,
        split: None,
    });
    if end - start <= leaf_size {
        return idx;
    }
    let dim = widest_dimension(&points[start..end]);
    let mid = start + (end - start) / 2;
    split_at_median(&mut points[start..end], dim, mid - start);
    let value = points[mid].v[dim];
    let left = build_kd(nodes, points, start, mid, leaf_size);
    let right = build_kd(nodes, points, mid, end, leaf_size);
    nodes[idx].split = Some(KdSplit {
        dim,
        value,
        left,
        right,
    });
    idx
}
