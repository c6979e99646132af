//! Map keyframes, their on-disk layout, and timestamp hint providers.
//!
//! Layout of a saved map directory:
//!
//! ```text
//! map/
//!   index.json          {"format_version": 1, "keyframes": [{timestamp, pose, grid, sidecar, provenance}]}
//!   kf_000000.pgm       boundary raster (see `bev`)
//!   kf_000000.json      sidecar with timestamp and grid geometry
//!   ...
//! ```

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bev::{grid_to_points, BevGrid, GridSidecar};
use crate::boundary::{
    write_observation, BoundaryCloud, BoundaryObservation, BoundarySource, DetectionMode,
    Provenance,
};
use crate::error::{Error, Result};
use crate::geometry::Pose2;
use crate::icp::KdTree;
use crate::world::Trajectory;

pub const MAP_FORMAT_VERSION: u32 = 1;

/// Default distance travelled between keyframes.
pub const DEFAULT_KEYFRAME_SPACING: f64 = 5.0;

/// A stored map entry: reference pose plus its boundary observation.
#[derive(Debug)]
pub struct MapKeyframe {
    pub timestamp: f64,
    pub reference_pose: Pose2,
    pub observation: BoundaryObservation,
    pub cloud_visible: BoundaryCloud,
    pub cloud_full: BoundaryCloud,
    index_visible: OnceLock<KdTree>,
    index_full: OnceLock<KdTree>,
}

impl MapKeyframe {
    pub fn new(reference_pose: Pose2, observation: BoundaryObservation) -> Self {
        Self {
            timestamp: observation.timestamp,
            reference_pose,
            cloud_visible: grid_to_points(&observation.grid, false),
            cloud_full: grid_to_points(&observation.grid, true),
            observation,
            index_visible: OnceLock::new(),
            index_full: OnceLock::new(),
        }
    }

    pub fn cloud(&self, mode: DetectionMode) -> &BoundaryCloud {
        match mode {
            DetectionMode::VisibleOnly => &self.cloud_visible,
            DetectionMode::VisibleAndOccluded => &self.cloud_full,
        }
    }

    /// Spatial index over [`MapKeyframe::cloud`], built on first use.
    pub fn index(&self, mode: DetectionMode) -> &KdTree {
        let cell = match mode {
            DetectionMode::VisibleOnly => &self.index_visible,
            DetectionMode::VisibleAndOccluded => &self.index_full,
        };
        cell.get_or_init(|| KdTree::new(self.cloud(mode).points()))
    }
}

#[derive(Debug, Default)]
pub struct MapStore {
    keyframes: Vec<MapKeyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapIndex {
    format_version: u32,
    keyframes: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    timestamp: f64,
    pose: Pose2,
    grid: String,
    sidecar: String,
    provenance: Provenance,
}

impl MapStore {
    pub fn from_keyframes(keyframes: Vec<MapKeyframe>) -> Result<Self> {
        if keyframes.windows(2).any(|w| !(w[0].timestamp < w[1].timestamp)) {
            return Err(Error::Domain("keyframe timestamps must be strictly increasing".into()));
        }
        Ok(Self { keyframes })
    }

    pub fn keyframes(&self) -> &[MapKeyframe] {
        &self.keyframes
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    /// Keyframe stored at exactly `timestamp` (within 1 ns).
    pub fn keyframe_at(&self, timestamp: f64) -> Option<&MapKeyframe> {
        let i = self.keyframes.partition_point(|k| k.timestamp < timestamp - 1e-9);
        self.keyframes
            .get(i)
            .filter(|k| (k.timestamp - timestamp).abs() <= 1e-9)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.keyframes.len());
        for (i, kf) in self.keyframes.iter().enumerate() {
            let written = write_observation(dir, &format!("kf_{i:06}"), &kf.observation)?;
            entries.push(IndexEntry {
                timestamp: kf.timestamp,
                pose: kf.reference_pose,
                grid: written.grid,
                sidecar: written.sidecar,
                provenance: kf.observation.provenance,
            });
        }
        let index = MapIndex {
            format_version: MAP_FORMAT_VERSION,
            keyframes: entries,
        };
        let path = dir.join("index.json");
        let text = serde_json::to_string_pretty(&index).expect("index serialises");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("index.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == MAP_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::format(&path, format!("unsupported map format_version {v}")))
            }
            None => return Err(Error::format(&path, "missing format_version")),
        }
        let index: MapIndex = serde_json::from_value(raw).map_err(|e| Error::format(&path, e))?;
        let mut keyframes = Vec::with_capacity(index.keyframes.len());
        for entry in index.keyframes {
            let sidecar_path = dir.join(&entry.sidecar);
            let sidecar = GridSidecar::read(&sidecar_path)?;
            if sidecar.timestamp != entry.timestamp {
                return Err(Error::format(sidecar_path, "sidecar timestamp disagrees with index"));
            }
            let grid = BevGrid::read_pgm(&dir.join(&entry.grid))?;
            keyframes.push(MapKeyframe::new(
                entry.pose,
                BoundaryObservation {
                    timestamp: entry.timestamp,
                    grid,
                    provenance: entry.provenance,
                },
            ));
        }
        Self::from_keyframes(keyframes).map_err(|e| Error::format(&path, e))
    }
}

/// Creates a keyframe at the first sample and then each time the distance
/// travelled since the last keyframe reaches `spacing`. Observations are
/// taken in full (visible and occluded) mode.
pub fn build_map(
    trajectory: &Trajectory,
    source: &dyn BoundarySource,
    spacing: f64,
) -> Result<MapStore> {
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!("keyframe spacing {spacing} must be positive")));
    }
    let samples = trajectory.samples();
    if samples.is_empty() {
        return Err(Error::Domain("cannot build a map from an empty trajectory".into()));
    }
    let mut keyframes = Vec::new();
    let mut travelled = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            travelled += samples[i - 1].pose.distance(&s.pose);
        }
        if i == 0 || travelled >= spacing - 1e-9 {
            let obs = source.observe(&s.pose, s.timestamp, DetectionMode::VisibleAndOccluded)?;
            keyframes.push(MapKeyframe::new(s.pose, obs));
            travelled = 0.0;
        }
    }
    MapStore::from_keyframes(keyframes)
}

/// Supplies the map timestamp corresponding to a live timestamp, never a pose.
pub trait HintProvider: Send + Sync {
    fn lookup(&self, live_timestamp: f64) -> Result<f64>;
}

/// Injected table of `(live timestamp, map timestamp)` pairs.
#[derive(Debug, Clone)]
pub struct TableHints {
    entries: Vec<(f64, f64)>,
}

impl TableHints {
    /// Every map timestamp must exist in `store`.
    pub fn new(mut entries: Vec<(f64, f64)>, store: &MapStore) -> Result<Self> {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, m) in &entries {
            if store.keyframe_at(*m).is_none() {
                return Err(Error::Lookup(format!("hint references unknown map timestamp {m}")));
            }
        }
        Ok(Self { entries })
    }

    /// CSV with header `live_timestamp,map_timestamp`.
    pub fn load_csv(path: &Path, store: &MapStore) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e))?;
        let mut entries = Vec::new();
        for record in reader.deserialize::<(f64, f64)>() {
            entries.push(record.map_err(|e| Error::format(path, e))?);
        }
        Self::new(entries, store)
    }
}

impl HintProvider for TableHints {
    fn lookup(&self, live_timestamp: f64) -> Result<f64> {
        let i = self.entries.partition_point(|e| e.0 < live_timestamp - 1e-6);
        self.entries
            .get(i)
            .filter(|e| (e.0 - live_timestamp).abs() <= 1e-6)
            .map(|e| e.1)
            .ok_or_else(|| Error::Lookup(format!("no hint for live timestamp {live_timestamp}")))
    }
}

/// Simulated place recogniser: picks the keyframe whose reference pose is
/// nearest to the live vehicle's true pose, optionally shifted along the
/// live heading to model hint error. Ties go to the earlier keyframe.
#[derive(Debug, Clone)]
pub struct NearestPoseHints {
    live: Trajectory,
    timestamps: Vec<f64>,
    index: KdTree,
    along_track_offset: f64,
}

impl NearestPoseHints {
    pub fn new(live: Trajectory, store: &MapStore, along_track_offset: f64) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::Domain("hint provider needs a non-empty map".into()));
        }
        let positions: Vec<_> = store
            .keyframes()
            .iter()
            .map(|k| k.reference_pose.position())
            .collect();
        Ok(Self {
            live,
            timestamps: store.keyframes().iter().map(|k| k.timestamp).collect(),
            index: KdTree::new(&positions),
            along_track_offset,
        })
    }
}

impl HintProvider for NearestPoseHints {
    fn lookup(&self, live_timestamp: f64) -> Result<f64> {
        let pose = self.live.interpolate(live_timestamp)?;
        let query = pose.to_world([self.along_track_offset, 0.0]);
        let (i, _) = self.index.nearest(query).expect("index is non-empty");
        Ok(self.timestamps[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::OracleSource;
    use crate::world::{generate_world, sample_trajectory, PassParams, TrajectorySample, WorldParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight_world(length: f64) -> crate::world::WorldModel {
        generate_world(
            &WorldParams {
                road_length_m: length,
                curvature_min: 0.0,
                curvature_max: 0.0,
                occluder_density_per_km: 0.0,
                map_occluder_density_per_km: 0.0,
                ..Default::default()
            },
            0,
        )
        .unwrap()
    }

    fn metre_steps(world: &crate::world::WorldModel) -> Trajectory {
        let pass = PassParams { speed_mps: 1.0, rate_hz: 1.0, ..Default::default() };
        sample_trajectory(world, &pass, 0.0, 0).unwrap()
    }

    #[test]
    fn keyframe_counts() {
        let w = straight_world(100.0);
        let traj = metre_steps(&w);
        assert_eq!(traj.len(), 101);
        let src = OracleSource::new(&w);
        assert_eq!(build_map(&traj, &src, 10.0).unwrap().len(), 11);
        assert_eq!(build_map(&traj, &src, 500.0).unwrap().len(), 1);
        assert!(build_map(&traj, &src, 0.0).is_err());
        assert!(matches!(
            build_map(&Trajectory::default(), &src, 5.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn curved_route_spacing_matches_cumulative_distance() {
        let w = generate_world(&WorldParams { map_occluder_density_per_km: 0.0, ..Default::default() }, 6).unwrap();
        let pass = PassParams { speed_mps: 7.0, rate_hz: 3.0, lateral_noise_sigma_m: 0.1, ..Default::default() };
        let traj = sample_trajectory(&w, &pass, 0.0, 2).unwrap();
        let store = build_map(&traj, &OracleSource::new(&w), 12.0).unwrap();
        // brute force: cumulative distance at every sample
        let mut cum = vec![0.0];
        for s in traj.samples().windows(2) {
            cum.push(cum.last().unwrap() + s[0].pose.distance(&s[1].pose));
        }
        let max_step = traj
            .samples()
            .windows(2)
            .map(|s| s[0].pose.distance(&s[1].pose))
            .fold(0.0, f64::max);
        let at = |t: f64| cum[traj.samples().iter().position(|s| s.timestamp == t).unwrap()];
        for pair in store.keyframes().windows(2) {
            let gap = at(pair[1].timestamp) - at(pair[0].timestamp);
            assert!(gap >= 12.0 - 1e-6 && gap <= 12.0 + max_step + 1e-6, "gap {gap}");
        }
        for kf in store.keyframes() {
            for p in kf.cloud_visible.points() {
                assert!(kf.cloud_full.points().contains(p));
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let w = generate_world(&WorldParams::default(), 1).unwrap();
        let traj = sample_trajectory(&w, &PassParams::default(), 0.0, 0).unwrap();
        let store = build_map(&traj, &OracleSource::new(&w), 20.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let back = MapStore::load(dir.path()).unwrap();
        assert_eq!(back.len(), store.len());
        for (a, b) in store.keyframes().iter().zip(back.keyframes()) {
            assert_eq!(a.timestamp, b.timestamp);
            assert_eq!(a.reference_pose, b.reference_pose);
            assert_eq!(a.observation.grid.to_pgm_bytes(), b.observation.grid.to_pgm_bytes());
            assert_eq!(a.cloud_full, b.cloud_full);
        }

        let index = dir.path().join("index.json");
        let text = fs::read_to_string(&index).unwrap();
        fs::write(&index, text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)).unwrap();
        assert!(matches!(MapStore::load(dir.path()), Err(Error::Format { .. })));
    }

    fn grid_store(poses: &[(f64, Pose2)]) -> MapStore {
        MapStore::from_keyframes(
            poses
                .iter()
                .map(|(t, p)| {
                    MapKeyframe::new(
                        *p,
                        BoundaryObservation { timestamp: *t, grid: BevGrid::new(), provenance: Provenance::File },
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn live_line(points: &[(f64, Pose2)]) -> Trajectory {
        Trajectory::new(points.iter().map(|(t, p)| TrajectorySample { timestamp: *t, pose: *p }).collect())
            .unwrap()
    }

    #[test]
    fn nearest_hint_rules() {
        let store = grid_store(&[(0.0, Pose2::new(0.0, 0.0, 0.0)), (1.0, Pose2::new(10.0, 0.0, 0.0))]);
        let live = live_line(&[
            (100.0, Pose2::new(0.0, 0.0, 0.0)),
            (101.0, Pose2::new(5.0, 0.0, 0.0)),
            (102.0, Pose2::new(9.0, 1.0, 0.0)),
        ]);
        let hints = NearestPoseHints::new(live.clone(), &store, 0.0).unwrap();
        assert_eq!(hints.lookup(100.0).unwrap(), 0.0);
        assert_eq!(hints.lookup(101.0).unwrap(), 0.0); // tie → earlier
        assert_eq!(hints.lookup(102.0).unwrap(), 1.0);
        assert!(matches!(hints.lookup(99.0), Err(Error::Lookup(_))));
        let shifted = NearestPoseHints::new(live, &store, 6.0).unwrap();
        assert_eq!(shifted.lookup(100.0).unwrap(), 1.0);
    }

    #[test]
    fn nearest_hint_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let kfs: Vec<(f64, Pose2)> = (0..40)
            .map(|i| (i as f64, Pose2::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), 0.0)))
            .collect();
        let store = grid_store(&kfs);
        let live: Vec<(f64, Pose2)> = (0..100)
            .map(|i| (1000.0 + i as f64, Pose2::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), 0.3)))
            .collect();
        let hints = NearestPoseHints::new(live_line(&live), &store, 0.0).unwrap();
        for (t, p) in &live {
            let mut best = (f64::INFINITY, 0.0);
            for (kt, kp) in &kfs {
                let d = (kp.x() - p.x()).powi(2) + (kp.y() - p.y()).powi(2);
                if d < best.0 {
                    best = (d, *kt);
                }
            }
            assert_eq!(hints.lookup(*t).unwrap(), best.1);
        }
    }

    #[test]
    fn table_hints() {
        let store = grid_store(&[(0.0, Pose2::identity()), (1.0, Pose2::new(5.0, 0.0, 0.0))]);
        let hints = TableHints::new(vec![(10.0, 1.0), (9.0, 0.0)], &store).unwrap();
        assert_eq!(hints.lookup(10.0).unwrap(), 1.0);
        assert_eq!(hints.lookup(9.0).unwrap(), 0.0);
        assert!(hints.lookup(9.5).is_err());
        assert!(TableHints::new(vec![(1.0, 7.0)], &store).is_err());
    }
}
