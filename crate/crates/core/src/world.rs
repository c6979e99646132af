//! Synthetic worlds: a smooth road centreline with left/right boundary
//! polylines, vehicle-like occluders with activity windows, and trajectories
//! driven along the road.
//!
//! The map pass runs at timestamps in `[0, live_time_offset_s)` and the live
//! pass from `live_time_offset_s` on. Occluders are scheduled in one of the
//! two windows, so the two passes see different traffic.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::bev::{RESOLUTION, ROI_HALF};
use crate::error::{Error, Result};
use crate::geometry::{interpolate_pose, Point2, Pose2};
use crate::seeds::derive_seed;

/// Boundary sampling step used when rendering: half a raster cell.
pub const SAMPLE_SPACING: f64 = RESOLUTION / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub road_length_m: f64,
    /// Length of each constant-curvature piece of the centreline.
    pub segment_length_m: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Distance between the left and right boundary.
    pub lane_width_m: f64,
    /// Occluders present during the live pass, per km of road.
    pub occluder_density_per_km: f64,
    /// Occluders present during the map pass, per km of road.
    pub map_occluder_density_per_km: f64,
    pub occluder_length_m: f64,
    pub occluder_width_m: f64,
    /// Gap between an occluder's outer side and the boundary next to it.
    pub occluder_edge_gap_m: f64,
    pub live_time_offset_s: f64,
    pub vertex_spacing_m: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            road_length_m: 300.0,
            segment_length_m: 40.0,
            curvature_min: -0.01,
            curvature_max: 0.01,
            lane_width_m: 7.0,
            occluder_density_per_km: 40.0,
            map_occluder_density_per_km: 10.0,
            occluder_length_m: 4.5,
            occluder_width_m: 1.8,
            occluder_edge_gap_m: 0.3,
            live_time_offset_s: 100_000.0,
            vertex_spacing_m: 0.5,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("road_length_m", self.road_length_m),
            ("segment_length_m", self.segment_length_m),
            ("lane_width_m", self.lane_width_m),
            ("occluder_length_m", self.occluder_length_m),
            ("occluder_width_m", self.occluder_width_m),
            ("live_time_offset_s", self.live_time_offset_s),
            ("vertex_spacing_m", self.vertex_spacing_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("occluder_density_per_km", self.occluder_density_per_km),
            ("map_occluder_density_per_km", self.map_occluder_density_per_km),
            ("occluder_edge_gap_m", self.occluder_edge_gap_m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.curvature_min <= self.curvature_max) {
            return Err(Error::Domain("curvature_min exceeds curvature_max".into()));
        }
        let half = self.lane_width_m / 2.0;
        let kmax = self.curvature_min.abs().max(self.curvature_max.abs());
        if kmax * half >= 0.9 {
            return Err(Error::Domain(format!(
                "curvature {kmax} too tight for lane half-width {half}"
            )));
        }
        if self.vertex_spacing_m > self.road_length_m {
            return Err(Error::Domain("vertex spacing exceeds road length".into()));
        }
        if half - self.occluder_edge_gap_m - self.occluder_width_m <= 0.0 {
            return Err(Error::Domain("occluders do not fit between centreline and boundary".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolyline {
    pub side: Side,
    pub vertices: Vec<Point2>,
}

/// Road centreline with per-vertex heading and arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centreline {
    pub points: Vec<Point2>,
    pub headings: Vec<f64>,
    pub arclength: Vec<f64>,
}

impl Centreline {
    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap_or(&0.0)
    }

    /// Pose on the centreline at arc length `s` (clamped to the road), with
    /// the road heading.
    pub fn pose_at(&self, s: f64) -> Pose2 {
        self.offset_pose_at(s, 0.0)
    }

    /// Pose displaced `offset` metres to the left of the centreline.
    pub fn offset_pose_at(&self, s: f64, offset: f64) -> Pose2 {
        let s = s.clamp(0.0, self.length());
        let i = self.arclength.partition_point(|a| *a <= s).clamp(1, self.points.len() - 1);
        let (s0, s1) = (self.arclength[i - 1], self.arclength[i]);
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let a = Pose2::new(self.points[i - 1][0], self.points[i - 1][1], self.headings[i - 1]);
        let b = Pose2::new(self.points[i][0], self.points[i][1], self.headings[i]);
        let p = interpolate_pose(&a, &b, f.clamp(0.0, 1.0)).expect("fraction clamped");
        let (sin, cos) = p.yaw().sin_cos();
        Pose2::new(p.x() - offset * sin, p.y() + offset * cos, p.yaw())
    }
}

/// Rectangle with centre, full length along `yaw`, and full width across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub centre: Point2,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
}

impl OrientedBox {
    fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.centre[0];
        let dy = p[1] - self.centre[1];
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn corners(&self) -> [Point2; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| {
            [self.centre[0] + c * u - s * v, self.centre[1] + s * u + c * v]
        })
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Whether the segment `a → b` touches the box (slab clipping in the box frame).
    pub fn intersects_segment(&self, a: Point2, b: Point2) -> bool {
        let p = self.to_local(a);
        let q = self.to_local(b);
        let half = [self.length / 2.0, self.width / 2.0];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..2 {
            let d = q[k] - p[k];
            if d.abs() < 1e-15 {
                if p[k].abs() > half[k] {
                    return false;
                }
                continue;
            }
            let mut lo = (-half[k] - p[k]) / d;
            let mut hi = (half[k] - p[k]) / d;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// An occluding obstacle present during `[active_from, active_until]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionEvent {
    #[serde(rename = "box")]
    pub shape: OrientedBox,
    pub active_from: f64,
    pub active_until: f64,
}

impl OcclusionEvent {
    pub fn is_active(&self, t: f64) -> bool {
        self.active_from <= t && t <= self.active_until
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point2,
    pub max: Point2,
}

impl Bounds {
    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub centreline: Centreline,
    pub boundaries: Vec<BoundaryPolyline>,
    pub occluders: Vec<OcclusionEvent>,
    pub bounds: Bounds,
    pub seed: u64,
    pub live_time_offset_s: f64,
}

impl WorldModel {
    pub fn validate(&self) -> Result<()> {
        for b in &self.boundaries {
            if b.vertices.len() < 2 {
                return Err(Error::Domain("boundary polyline needs at least 2 vertices".into()));
            }
            if b.vertices.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain("boundary polyline has repeated vertices".into()));
            }
        }
        if self.centreline.points.len() < 2 {
            return Err(Error::Domain("centreline needs at least 2 vertices".into()));
        }
        for o in &self.occluders {
            if !(o.active_from < o.active_until) {
                return Err(Error::Domain("occluder interval must have t_start < t_end".into()));
            }
            if !(o.shape.length > 0.0 && o.shape.width > 0.0) {
                return Err(Error::Domain("occluder extents must be positive".into()));
            }
            if !o.shape.corners().iter().all(|c| self.bounds.contains(*c)) {
                return Err(Error::Domain("occluder lies outside world bounds".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let world: WorldModel = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        world.validate()?;
        Ok(world)
    }
}

/// Builds a deterministic world from `params` and `seed`.
///
/// The centreline is a chain of constant-curvature arcs; boundaries are its
/// offsets at ± half the lane width.
pub fn generate_world(params: &WorldParams, seed: u64) -> Result<WorldModel> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5701_1d));

    let n_pieces = (params.road_length_m / params.segment_length_m).ceil() as usize;
    let curvatures: Vec<f64> = (0..n_pieces)
        .map(|_| {
            if params.curvature_min == params.curvature_max {
                params.curvature_min
            } else {
                rng.random_range(params.curvature_min..=params.curvature_max)
            }
        })
        .collect();

    let steps = (params.road_length_m / params.vertex_spacing_m).ceil() as usize;
    let ds = params.road_length_m / steps as f64;
    let mut points = Vec::with_capacity(steps + 1);
    let mut headings = Vec::with_capacity(steps + 1);
    let mut arclength = Vec::with_capacity(steps + 1);
    let (mut x, mut y, mut h) = (0.0f64, 0.0f64, 0.0f64);
    points.push([x, y]);
    headings.push(h);
    arclength.push(0.0);
    for k in 0..steps {
        let s_mid = (k as f64 + 0.5) * ds;
        let piece = ((s_mid / params.segment_length_m) as usize).min(n_pieces - 1);
        let kappa = curvatures[piece];
        if kappa.abs() < 1e-12 {
            x += ds * h.cos();
            y += ds * h.sin();
        } else {
            let h1 = h + kappa * ds;
            x += (h1.sin() - h.sin()) / kappa;
            y -= (h1.cos() - h.cos()) / kappa;
            h = h1;
        }
        points.push([x, y]);
        headings.push(h);
        arclength.push((k + 1) as f64 * ds);
    }
    let centreline = Centreline {
        points,
        headings,
        arclength,
    };

    let half = params.lane_width_m / 2.0;
    let boundaries: Vec<BoundaryPolyline> = [Side::Left, Side::Right]
        .into_iter()
        .map(|side| BoundaryPolyline {
            side,
            vertices: centreline
                .points
                .iter()
                .zip(&centreline.headings)
                .map(|(p, h)| {
                    let off = side.sign() * half;
                    [p[0] - off * h.sin(), p[1] + off * h.cos()]
                })
                .collect(),
        })
        .collect();

    let mut occluders = Vec::new();
    let lateral = half - params.occluder_edge_gap_m - params.occluder_width_m / 2.0;
    let windows = [
        (params.map_occluder_density_per_km, 0.0, params.live_time_offset_s),
        (
            params.occluder_density_per_km,
            params.live_time_offset_s,
            2.0 * params.live_time_offset_s,
        ),
    ];
    for (density, from, until) in windows {
        let expected = density * params.road_length_m / 1000.0;
        let count = if expected > 0.0 {
            Poisson::new(expected).expect("positive rate").sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            let s = rng.random_range(0.0..=params.road_length_m);
            let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
            let pose = centreline.offset_pose_at(s, side.sign() * lateral);
            occluders.push(OcclusionEvent {
                shape: OrientedBox {
                    centre: pose.position(),
                    length: params.occluder_length_m,
                    width: params.occluder_width_m,
                    yaw: pose.yaw(),
                },
                active_from: from,
                active_until: until,
            });
        }
    }

    let margin = ROI_HALF * 2.0;
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in boundaries.iter().flat_map(|b| b.vertices.iter()) {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let bounds = Bounds {
        min: [min[0] - margin, min[1] - margin],
        max: [max[0] + margin, max[1] + margin],
    };

    let world = WorldModel {
        centreline,
        boundaries,
        occluders,
        bounds,
        seed,
        live_time_offset_s: params.live_time_offset_s,
    };
    world.validate()?;
    Ok(world)
}

/// Driving parameters for one pass along the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassParams {
    pub speed_mps: f64,
    pub rate_hz: f64,
    pub lateral_noise_sigma_m: f64,
    /// Arc length at which the pass starts.
    pub start_offset_m: f64,
    pub max_speed_mps: f64,
}

impl Default for PassParams {
    fn default() -> Self {
        Self {
            speed_mps: 10.0,
            rate_hz: 2.0,
            lateral_noise_sigma_m: 0.0,
            start_offset_m: 0.0,
            max_speed_mps: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub timestamp: f64,
    pub pose: Pose2,
}

/// Timestamped poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[0].timestamp < w[1].timestamp)) {
            return Err(Error::Domain("trajectory timestamps must be strictly increasing".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.timestamp, self.samples.last()?.timestamp))
    }

    /// Fails if any step implies a speed above `max_speed`.
    pub fn check_speed(&self, max_speed: f64) -> Result<()> {
        for w in self.samples.windows(2) {
            let v = w[0].pose.distance(&w[1].pose) / (w[1].timestamp - w[0].timestamp);
            if v > max_speed {
                return Err(Error::Domain(format!(
                    "speed {v:.2} m/s at t={} exceeds {max_speed} m/s",
                    w[1].timestamp
                )));
            }
        }
        Ok(())
    }

    /// Pose at `t`, interpolated between the bracketing samples.
    pub fn interpolate(&self, t: f64) -> Result<Pose2> {
        let (t0, t1) = self
            .time_span()
            .ok_or_else(|| Error::Lookup("empty trajectory".into()))?;
        if !(t >= t0 && t <= t1) {
            return Err(Error::Lookup(format!("timestamp {t} outside [{t0}, {t1}]")));
        }
        let i = self.samples.partition_point(|s| s.timestamp < t);
        let hi = &self.samples[i];
        if hi.timestamp == t {
            return Ok(hi.pose);
        }
        let lo = &self.samples[i - 1];
        let s = (t - lo.timestamp) / (hi.timestamp - lo.timestamp);
        interpolate_pose(&lo.pose, &hi.pose, s)
    }

    /// CSV with header `timestamp,x,y,yaw`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,x,y,yaw\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.timestamp,
                s.pose.x(),
                s.pose.y(),
                s.pose.yaw()
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(io) => {
                    Error::io(path, std::io::Error::new(io.kind(), io.to_string()))
                }
                _ => Error::format(path, e),
            })?;
        let headers = reader.headers().map_err(|e| Error::format(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["timestamp", "x", "y", "yaw"] {
            return Err(Error::format(path, "expected header timestamp,x,y,yaw"));
        }
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::format(path, e))?;
            let v: Vec<f64> = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, e))?;
            samples.push(TrajectorySample {
                timestamp: v[0],
                pose: Pose2::try_new(v[1], v[2], v[3])?,
            });
        }
        Trajectory::new(samples).map_err(|e| Error::format(path, e))
    }
}

/// Drives the road centreline at constant speed with i.i.d. Gaussian lateral
/// offsets; heading follows the road.
pub fn sample_trajectory(
    world: &WorldModel,
    params: &PassParams,
    start_time: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(params.rate_hz > 0.0 && params.speed_mps > 0.0) {
        return Err(Error::Domain("rate and speed must be positive".into()));
    }
    if !(params.lateral_noise_sigma_m >= 0.0) {
        return Err(Error::Domain("lateral noise sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7a_1ec));
    let noise = Normal::new(0.0, params.lateral_noise_sigma_m).expect("sigma checked");
    let step = params.speed_mps / params.rate_hz;
    let length = world.centreline.length();
    let mut samples = Vec::new();
    let mut k = 0usize;
    loop {
        let s = params.start_offset_m + k as f64 * step;
        if s > length {
            break;
        }
        let offset = if params.lateral_noise_sigma_m > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        samples.push(TrajectorySample {
            timestamp: start_time + k as f64 / params.rate_hz,
            pose: world.centreline.offset_pose_at(s, offset),
        });
        k += 1;
    }
    let traj = Trajectory::new(samples)?;
    traj.check_speed(params.max_speed_mps)?;
    Ok(traj)
}

/// Ground-truth boundary samples around a pose, in the vehicle frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderedBoundaries {
    pub visible: Vec<Point2>,
    pub occluded: Vec<Point2>,
}

impl RenderedBoundaries {
    pub fn occluded_fraction(&self) -> f64 {
        let total = self.visible.len() + self.occluded.len();
        if total == 0 {
            0.0
        } else {
            self.occluded.len() as f64 / total as f64
        }
    }
}

/// Samples every boundary at [`SAMPLE_SPACING`], keeps samples inside the
/// ROI and splits them by line of sight from the sensor origin (given in
/// the vehicle frame) against occluders active at `timestamp`.
pub fn render_true_boundaries(
    world: &WorldModel,
    pose: &Pose2,
    timestamp: f64,
    sensor_origin: Point2,
) -> RenderedBoundaries {
    let reach = ROI_HALF * std::f64::consts::SQRT_2;
    let sensor = pose.to_world(sensor_origin);
    let occluders: Vec<&OrientedBox> = world
        .occluders
        .iter()
        .filter(|o| o.is_active(timestamp))
        .map(|o| &o.shape)
        .filter(|b| {
            let d = (b.centre[0] - pose.x()).hypot(b.centre[1] - pose.y());
            d <= reach + b.circumradius() + sensor_origin[0].hypot(sensor_origin[1])
        })
        .collect();

    let mut out = RenderedBoundaries::default();
    let mut classify = |world_pt: Point2| {
        let local = pose.to_local(world_pt);
        if !(local[0].abs() < ROI_HALF && local[1].abs() < ROI_HALF) {
            return;
        }
        if occluders.iter().any(|b| b.intersects_segment(sensor, world_pt)) {
            out.occluded.push(local);
        } else {
            out.visible.push(local);
        }
    };

    for boundary in &world.boundaries {
        let v = &boundary.vertices;
        for (i, w) in v.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let last = i + 2 == v.len();
            if (mid[0] - pose.x()).hypot(mid[1] - pose.y()) > reach + len / 2.0 + 1e-6 {
                continue;
            }
            let n = ((len / SAMPLE_SPACING).ceil() as usize).max(1);
            for k in 0..n {
                let f = k as f64 / n as f64;
                classify([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
            }
            if last {
                classify(b);
            }
        }
    }
    out
}
