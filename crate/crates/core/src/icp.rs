//! SE(2) point-to-point ICP for boundary clouds.
//!
//! Correspondences come from a 2D kd-tree over the map cloud; each iteration
//! optionally discards the worst fraction of correspondences by distance
//! (trimmed ICP, the "worst rejection" variant) and solves the closed-form
//! least-squares rigid alignment. Results use the `map_from_live`
//! convention: `result.transform.apply(live_point)` lands on the map cloud.

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryCloud, PointLabel};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Transform2};

/// Static 2D kd-tree. Nearest-neighbour ties resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point2>,
    /// Point indices arranged as an implicit balanced tree: the median of
    /// `order[lo..hi]` sits at `(lo + hi) / 2`, split axis = depth % 2.
    order: Vec<usize>,
}

impl KdTree {
    pub fn new(points: &[Point2]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Nearest point within `max_dist` (inclusive) as `(index, squared distance)`.
    pub fn nearest_within(&self, q: Point2, max_dist: f64) -> Option<(usize, f64)> {
        let mut best = (max_dist * max_dist, usize::MAX);
        self.search(q, 0, self.order.len(), 0, &mut best);
        (best.1 != usize::MAX).then_some((best.1, best.0))
    }

    pub fn nearest(&self, q: Point2) -> Option<(usize, f64)> {
        self.nearest_within(q, f64::INFINITY)
    }

    fn search(&self, q: Point2, lo: usize, hi: usize, depth: usize, best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        let dx = q[0] - p[0];
        let dy = q[1] - p[1];
        let d2 = dx * dx + dy * dy;
        if d2 < best.0 || (d2 == best.0 && idx < best.1) {
            *best = (d2, idx);
        }
        let axis = depth % 2;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        // `<=` keeps equal-distance candidates reachable for the tie rule
        if diff * diff <= best.0 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(points: &[Point2], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 2;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |a, b| {
        points[*a][axis]
            .total_cmp(&points[*b][axis])
            .then(a.cmp(b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

/// A matched pair: query point index, target point index and their distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub query: usize,
    pub target: usize,
    pub distance: f64,
}

/// Nearest target for every query point within `max_dist`; unmatched query
/// points are omitted.
pub fn nearest_neighbors(
    query: &BoundaryCloud,
    target: &BoundaryCloud,
    max_dist: f64,
) -> Result<Vec<Correspondence>> {
    if target.is_empty() {
        return Err(Error::Domain("nearest-neighbour target cloud is empty".into()));
    }
    let tree = KdTree::new(target.points());
    Ok(correspond(query.points(), &tree, max_dist))
}

fn correspond(query: &[Point2], tree: &KdTree, max_dist: f64) -> Vec<Correspondence> {
    query
        .iter()
        .enumerate()
        .filter_map(|(i, q)| {
            tree.nearest_within(*q, max_dist).map(|(j, d2)| Correspondence {
                query: i,
                target: j,
                distance: d2.sqrt(),
            })
        })
        .collect()
}

/// Closed-form SE(2) least squares: the transform minimising
/// `Σ‖T·sᵢ − tᵢ‖²` over `(source, target)` pairs.
pub fn estimate_rigid_2d(pairs: &[(Point2, Point2)]) -> Result<Transform2> {
    let weights = vec![1.0; pairs.len()];
    estimate_rigid_2d_weighted(pairs, &weights)
}

/// Weighted form of [`estimate_rigid_2d`]; weights must be non-negative.
pub fn estimate_rigid_2d_weighted(pairs: &[(Point2, Point2)], weights: &[f64]) -> Result<Transform2> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "rigid estimate needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    debug_assert_eq!(pairs.len(), weights.len());
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::Degenerate("all correspondence weights are zero".into()));
    }
    let mut cs = [0.0; 2];
    let mut ct = [0.0; 2];
    for ((s, t), w) in pairs.iter().zip(weights) {
        cs[0] += w * s[0];
        cs[1] += w * s[1];
        ct[0] += w * t[0];
        ct[1] += w * t[1];
    }
    cs = [cs[0] / wsum, cs[1] / wsum];
    ct = [ct[0] / wsum, ct[1] / wsum];

    let (mut sxx, mut sxy, mut syx, mut syy, mut spread) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((s, t), w) in pairs.iter().zip(weights) {
        let a = [s[0] - cs[0], s[1] - cs[1]];
        let b = [t[0] - ct[0], t[1] - ct[1]];
        sxx += w * a[0] * b[0];
        sxy += w * a[0] * b[1];
        syx += w * a[1] * b[0];
        syy += w * a[1] * b[1];
        spread += w * (a[0] * a[0] + a[1] * a[1]);
    }
    if spread <= 1e-24 * wsum {
        return Err(Error::Degenerate("source points are coincident".into()));
    }
    let theta = (sxy - syx).atan2(sxx + syy);
    let (sin, cos) = theta.sin_cos();
    Ok(Transform2::new(
        ct[0] - (cos * cs[0] - sin * cs[1]),
        ct[1] - (sin * cs[0] + cos * cs[1]),
        theta,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub max_iterations: usize,
    pub translation_tolerance: f64,
    pub rotation_tolerance: f64,
    pub max_correspondence_distance: f64,
    /// Fraction of correspondences (worst by distance) dropped each iteration.
    pub trim_fraction: f64,
    /// Weight of occluded live points relative to visible ones.
    pub occluded_weight: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            translation_tolerance: 1e-4,
            rotation_tolerance: 1e-5,
            max_correspondence_distance: 2.0,
            trim_fraction: 0.0,
            occluded_weight: 1.0,
        }
    }
}

impl IcpConfig {
    /// Trimmed variant dropping the worst 20 % of correspondences.
    pub fn worst_rejection() -> Self {
        Self {
            trim_fraction: 0.2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.translation_tolerance > 0.0 && self.rotation_tolerance > 0.0) {
            return Err(Error::Domain("ICP tolerances must be positive".into()));
        }
        if !(self.max_correspondence_distance > 0.0) {
            return Err(Error::Domain("max_correspondence_distance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::Domain(format!(
                "trim_fraction {} outside [0, 1)",
                self.trim_fraction
            )));
        }
        if !(self.occluded_weight >= 0.0 && self.occluded_weight.is_finite()) {
            return Err(Error::Domain("occluded_weight must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// `map_from_live`.
    pub transform: Transform2,
    pub iterations: usize,
    /// Root-mean-square distance of the final retained correspondences,
    /// evaluated at the returned transform.
    pub mean_residual: f64,
    pub inlier_count: usize,
    pub converged: bool,
    /// RMS distance of the retained correspondences at the start of each
    /// iteration.
    pub residual_history: Vec<f64>,
}

/// Aligns `live` onto `map` starting from `init`.
pub fn icp_align(
    live: &BoundaryCloud,
    map: &BoundaryCloud,
    init: Transform2,
    config: &IcpConfig,
) -> Result<IcpResult> {
    if map.is_empty() {
        return Err(Error::Domain("map cloud is empty".into()));
    }
    icp_align_indexed(live, &KdTree::new(map.points()), init, config)
}

/// [`icp_align`] against a prebuilt index of the map cloud.
pub fn icp_align_indexed(
    live: &BoundaryCloud,
    map: &KdTree,
    init: Transform2,
    config: &IcpConfig,
) -> Result<IcpResult> {
    config.validate()?;
    if live.is_empty() {
        return Err(Error::Domain("live cloud is empty".into()));
    }
    if map.is_empty() {
        return Err(Error::Domain("map cloud is empty".into()));
    }
    let weight_of = |label: PointLabel| match label {
        PointLabel::Visible => 1.0,
        PointLabel::Occluded => config.occluded_weight,
    };

    let mut transform = init;
    let mut history = Vec::with_capacity(config.max_iterations);
    let mut moved: Vec<Point2> = Vec::with_capacity(live.len());
    let mut converged = false;
    let mut iterations = 0;
    let mut retained: Vec<Correspondence> = Vec::new();

    while iterations < config.max_iterations {
        iterations += 1;
        moved.clear();
        moved.extend(live.points().iter().map(|p| transform.apply(*p)));
        let mut pairs = correspond(&moved, map, config.max_correspondence_distance);
        if pairs.is_empty() {
            return Err(Error::NoOverlap {
                iteration: iterations,
            });
        }
        trim_worst(&mut pairs, config.trim_fraction);
        history.push(rms(pairs.iter().map(|c| c.distance)));

        let point_pairs: Vec<(Point2, Point2)> = pairs
            .iter()
            .map(|c| (moved[c.query], map.points()[c.target]))
            .collect();
        let weights: Vec<f64> = pairs
            .iter()
            .map(|c| weight_of(live.labels()[c.query]))
            .collect();
        let step = estimate_rigid_2d_weighted(&point_pairs, &weights)?;
        transform = step.compose(&transform);
        retained = pairs;
        if step.translation_norm() < config.translation_tolerance
            && step.dtheta().abs() < config.rotation_tolerance
        {
            converged = true;
            break;
        }
    }

    let mean_residual = rms(retained.iter().map(|c| {
        let p = transform.apply(live.points()[c.query]);
        let q = map.points()[c.target];
        (p[0] - q[0]).hypot(p[1] - q[1])
    }));
    Ok(IcpResult {
        transform,
        iterations,
        mean_residual,
        inlier_count: retained.len(),
        converged,
        residual_history: history,
    })
}

/// Keeps the best `n − ⌈fraction·n⌉` pairs by (distance, query index).
fn trim_worst(pairs: &mut Vec<Correspondence>, fraction: f64) {
    if fraction <= 0.0 {
        return;
    }
    let drop = (fraction * pairs.len() as f64).ceil() as usize;
    let keep = pairs.len().saturating_sub(drop);
    pairs.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.query.cmp(&b.query)));
    pairs.truncate(keep);
    pairs.sort_by_key(|c| c.query);
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
