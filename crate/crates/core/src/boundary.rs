//! Boundary observations and the sources that produce them.
//!
//! A [`BoundarySource`] stands in for a road boundary detector: given a
//! vehicle pose and timestamp it returns a labelled BEV raster. The
//! [`OracleSource`] renders ground truth from a [`WorldModel`]: visible-only
//! mode keeps cells with a clear line of sight, full mode additionally marks
//! the hidden true boundary as occluded (an ideal occlusion-inference
//! model). [`FileSource`] replays stored PGM grids, and [`DegradedSource`]
//! wraps any source with detection noise.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bev::{BevGrid, CellLabel, GridSidecar, ROI_HALF};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::seeds::derive_seed;
use crate::world::{render_true_boundaries, WorldModel};

/// Which boundary classes take part in matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    VisibleOnly,
    VisibleAndOccluded,
}

impl DetectionMode {
    pub fn includes_occluded(self) -> bool {
        self == DetectionMode::VisibleAndOccluded
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMode::VisibleOnly => "visible_only",
            DetectionMode::VisibleAndOccluded => "visible_and_occluded",
        }
    }
}

impl fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visible_only" => Ok(DetectionMode::VisibleOnly),
            "visible_and_occluded" => Ok(DetectionMode::VisibleAndOccluded),
            other => Err(Error::Config(format!("unknown detection mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OracleVisible,
    OracleFull,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryObservation {
    pub timestamp: f64,
    pub grid: BevGrid,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    Visible,
    Occluded,
}

/// 2D boundary points in the vehicle frame with per-point labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryCloud {
    points: Vec<Point2>,
    labels: Vec<PointLabel>,
}

impl BoundaryCloud {
    pub fn new(points: Vec<Point2>, labels: Vec<PointLabel>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Domain("points and labels differ in length".into()));
        }
        if points.iter().any(|p| p[0].abs() > ROI_HALF || p[1].abs() > ROI_HALF) {
            return Err(Error::Domain("boundary point outside the ROI".into()));
        }
        Ok(Self { points, labels })
    }

    /// All-visible cloud; points outside the ROI are rejected.
    pub fn from_points(points: Vec<Point2>) -> Result<Self> {
        let labels = vec![PointLabel::Visible; points.len()];
        Self::new(points, labels)
    }

    pub(crate) fn push(&mut self, p: Point2, label: PointLabel) {
        self.points.push(p);
        self.labels.push(label);
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn labels(&self) -> &[PointLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, label: PointLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }
}

/// Anything that can report boundary observations for a pose and time.
pub trait BoundarySource: Send + Sync {
    fn observe(&self, pose: &Pose2, timestamp: f64, mode: DetectionMode)
        -> Result<BoundaryObservation>;
}

/// Ground-truth renderer over a synthetic world.
#[derive(Debug, Clone, Copy)]
pub struct OracleSource<'w> {
    world: &'w WorldModel,
    /// Sensor position in the vehicle frame.
    sensor_origin: Point2,
}

impl<'w> OracleSource<'w> {
    pub fn new(world: &'w WorldModel) -> Self {
        Self {
            world,
            sensor_origin: [0.0, 0.0],
        }
    }

    pub fn with_sensor_origin(mut self, origin: Point2) -> Self {
        self.sensor_origin = origin;
        self
    }

    pub fn world(&self) -> &WorldModel {
        self.world
    }
}

impl BoundarySource for OracleSource<'_> {
    fn observe(
        &self,
        pose: &Pose2,
        timestamp: f64,
        mode: DetectionMode,
    ) -> Result<BoundaryObservation> {
        if !self.world.bounds.contains(pose.position()) {
            return Err(Error::Domain(format!(
                "pose ({:.2}, {:.2}) outside world bounds",
                pose.x(),
                pose.y()
            )));
        }
        let rendered = render_true_boundaries(self.world, pose, timestamp, self.sensor_origin);
        let mut grid = BevGrid::new();
        for p in &rendered.visible {
            grid.mark_point(*p, CellLabel::VisibleBoundary);
        }
        if mode.includes_occluded() {
            for p in &rendered.occluded {
                grid.mark_point(*p, CellLabel::OccludedBoundary);
            }
        }
        Ok(BoundaryObservation {
            timestamp,
            grid,
            provenance: match mode {
                DetectionMode::VisibleOnly => Provenance::OracleVisible,
                DetectionMode::VisibleAndOccluded => Provenance::OracleFull,
            },
        })
    }
}

/// Manifest mapping timestamps to stored grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationManifest {
    pub format_version: u32,
    pub frames: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub timestamp: f64,
    /// PGM path relative to the manifest directory.
    pub grid: String,
    /// Sidecar JSON path relative to the manifest directory.
    pub sidecar: String,
}

pub const MANIFEST_VERSION: u32 = 1;

/// Writes `<stem>.pgm` and `<stem>.json` for an observation into `dir`.
pub fn write_observation(dir: &Path, stem: &str, obs: &BoundaryObservation) -> Result<ManifestEntry> {
    let grid = format!("{stem}.pgm");
    let sidecar = format!("{stem}.json");
    obs.grid.write_pgm(&dir.join(&grid))?;
    GridSidecar::new(obs.timestamp, Some(obs.provenance)).write(&dir.join(&sidecar))?;
    Ok(ManifestEntry {
        timestamp: obs.timestamp,
        grid,
        sidecar,
    })
}

/// Writes a stream of observations plus `manifest.json` into `dir`.
pub fn write_observation_set(dir: &Path, observations: &[BoundaryObservation]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frames = observations
        .iter()
        .enumerate()
        .map(|(i, obs)| write_observation(dir, &format!("frame_{i:06}"), obs))
        .collect::<Result<Vec<_>>>()?;
    let manifest = ObservationManifest {
        format_version: MANIFEST_VERSION,
        frames,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Replays stored grids by timestamp. The pose argument is ignored.
#[derive(Debug, Clone)]
pub struct FileSource {
    root: PathBuf,
    frames: Vec<ManifestEntry>,
}

impl FileSource {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: ObservationManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(manifest_path, e))?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(Error::format(
                manifest_path,
                format!("unsupported manifest version {}", manifest.format_version),
            ));
        }
        if manifest
            .frames
            .windows(2)
            .any(|w| !(w[0].timestamp < w[1].timestamp))
        {
            return Err(Error::format(manifest_path, "timestamps not strictly increasing"));
        }
        Ok(Self {
            root: manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            frames: manifest.frames,
        })
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.timestamp)
    }

    fn entry(&self, timestamp: f64) -> Result<&ManifestEntry> {
        let i = self.frames.partition_point(|f| f.timestamp < timestamp - 1e-9);
        self.frames
            .get(i)
            .filter(|f| (f.timestamp - timestamp).abs() <= 1e-9)
            .ok_or_else(|| Error::Lookup(format!("no stored frame at t={timestamp}")))
    }

    /// Reads every stored observation in timestamp order.
    pub fn load_all(&self, mode: DetectionMode) -> Result<Vec<BoundaryObservation>> {
        self.frames
            .iter()
            .map(|f| self.observe(&Pose2::identity(), f.timestamp, mode))
            .collect()
    }
}

impl BoundarySource for FileSource {
    fn observe(
        &self,
        _pose: &Pose2,
        timestamp: f64,
        mode: DetectionMode,
    ) -> Result<BoundaryObservation> {
        let entry = self.entry(timestamp)?;
        let sidecar_path = self.root.join(&entry.sidecar);
        let sidecar = GridSidecar::read(&sidecar_path)?;
        if sidecar.timestamp != entry.timestamp {
            return Err(Error::format(sidecar_path, "sidecar timestamp disagrees with manifest"));
        }
        let grid = BevGrid::read_pgm(&self.root.join(&entry.grid))?;
        let grid = match mode {
            DetectionMode::VisibleAndOccluded => grid,
            DetectionMode::VisibleOnly => grid.visible_only(),
        };
        Ok(BoundaryObservation {
            timestamp: entry.timestamp,
            grid,
            provenance: Provenance::File,
        })
    }
}

fn check_noise(dropout: f64, jitter_sigma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Domain(format!("dropout {dropout} outside [0, 1)")));
    }
    if !(jitter_sigma >= 0.0 && jitter_sigma.is_finite()) {
        return Err(Error::Domain(format!("jitter sigma {jitter_sigma} must be >= 0")));
    }
    Ok(())
}

fn degrade_cells(
    obs: &BoundaryObservation,
    dropout: f64,
    jitter_sigma: f64,
    seed: u64,
    affected: impl Fn(CellLabel) -> bool,
) -> Result<BoundaryObservation> {
    check_noise(dropout, jitter_sigma)?;
    if dropout == 0.0 && jitter_sigma == 0.0 {
        return Ok(obs.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, jitter_sigma).expect("sigma checked");
    let mut out = BevGrid::new();
    let mut moved = Vec::new();
    for (ix, iy, label) in obs.grid.iter_boundary() {
        if !affected(label) {
            out.mark(ix, iy, label);
            continue;
        }
        if dropout > 0.0 && rng.random::<f64>() < dropout {
            continue;
        }
        let c = BevGrid::cell_centre(ix, iy);
        if jitter_sigma > 0.0 {
            let p = [c[0] + jitter.sample(&mut rng), c[1] + jitter.sample(&mut rng)];
            moved.push((p, label));
        } else {
            moved.push((c, label));
        }
    }
    for (p, label) in moved {
        out.mark_point(p, label);
    }
    Ok(BoundaryObservation {
        timestamp: obs.timestamp,
        grid: out,
        provenance: obs.provenance,
    })
}

/// Drops each boundary cell with probability `dropout` and displaces the
/// survivors by isotropic Gaussian jitter, re-rasterised into a fresh grid.
pub fn degrade_detection(
    obs: &BoundaryObservation,
    dropout: f64,
    jitter_sigma: f64,
    seed: u64,
) -> Result<BoundaryObservation> {
    degrade_cells(obs, dropout, jitter_sigma, seed, CellLabel::is_boundary)
}

/// Like [`degrade_detection`] but only occluded cells are touched.
pub fn degrade_occluded(
    obs: &BoundaryObservation,
    dropout: f64,
    jitter_sigma: f64,
    seed: u64,
) -> Result<BoundaryObservation> {
    degrade_cells(obs, dropout, jitter_sigma, seed, |l| {
        l == CellLabel::OccludedBoundary
    })
}

/// Adds `count` spurious visible detections uniformly over the ROI.
pub fn inject_clutter(obs: &BoundaryObservation, count: usize, seed: u64) -> BoundaryObservation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = obs.grid.clone();
    for _ in 0..count {
        let p = [
            rng.random_range(-ROI_HALF..ROI_HALF),
            rng.random_range(-ROI_HALF..ROI_HALF),
        ];
        grid.mark_point(p, CellLabel::VisibleBoundary);
    }
    BoundaryObservation {
        timestamp: obs.timestamp,
        grid,
        provenance: obs.provenance,
    }
}

/// Detection-noise knobs applied by [`DegradedSource`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationParams {
    pub dropout: f64,
    pub jitter_sigma_m: f64,
    /// Extra dropout applied to occluded cells only.
    pub occluded_dropout: f64,
    pub occluded_jitter_sigma_m: f64,
    /// Per frame, spurious detections amounting to a uniform random fraction
    /// in `[0, clutter_max_fraction]` of the frame's boundary cells.
    pub clutter_max_fraction: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            dropout: 0.1,
            jitter_sigma_m: 0.02,
            occluded_dropout: 0.0,
            occluded_jitter_sigma_m: 0.0,
            clutter_max_fraction: 0.0,
        }
    }
}

impl DegradationParams {
    pub fn none() -> Self {
        Self {
            dropout: 0.0,
            jitter_sigma_m: 0.0,
            occluded_dropout: 0.0,
            occluded_jitter_sigma_m: 0.0,
            clutter_max_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_noise(self.dropout, self.jitter_sigma_m)?;
        check_noise(self.occluded_dropout, self.occluded_jitter_sigma_m)?;
        if !(self.clutter_max_fraction >= 0.0 && self.clutter_max_fraction.is_finite()) {
            return Err(Error::Domain("clutter_max_fraction must be >= 0".into()));
        }
        Ok(())
    }

    /// Applies all knobs with a seed derived from `seed` and the timestamp.
    pub fn apply(&self, obs: &BoundaryObservation, seed: u64) -> Result<BoundaryObservation> {
        let frame_seed = derive_seed(seed, obs.timestamp.to_bits());
        let out = degrade_detection(obs, self.dropout, self.jitter_sigma_m, derive_seed(frame_seed, 1))?;
        let out = degrade_occluded(
            &out,
            self.occluded_dropout,
            self.occluded_jitter_sigma_m,
            derive_seed(frame_seed, 2),
        )?;
        if self.clutter_max_fraction > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(frame_seed, 3));
            let fraction = rng.random_range(0.0..=self.clutter_max_fraction);
            let count = (fraction * out.grid.boundary_count() as f64).round() as usize;
            return Ok(inject_clutter(&out, count, derive_seed(frame_seed, 4)));
        }
        Ok(out)
    }
}

/// Wraps a source with deterministic per-frame detection noise.
pub struct DegradedSource<S> {
    inner: S,
    params: DegradationParams,
    seed: u64,
}

impl<S: BoundarySource> DegradedSource<S> {
    pub fn new(inner: S, params: DegradationParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            inner,
            params,
            seed,
        })
    }
}

impl<S: BoundarySource> BoundarySource for DegradedSource<S> {
    fn observe(
        &self,
        pose: &Pose2,
        timestamp: f64,
        mode: DetectionMode,
    ) -> Result<BoundaryObservation> {
        let obs = self.inner.observe(pose, timestamp, mode)?;
        self.params.apply(&obs, self.seed)
    }
}
