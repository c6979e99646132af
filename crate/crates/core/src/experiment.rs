//! Reproducible map/live experiments over synthetic worlds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryObservation, BoundarySource, DegradationParams, DegradedSource, DetectionMode, OracleSource};
use crate::error::{Error, Result};
use crate::eval::{align_to_reference, Alignment, EvalRecord};
use crate::geometry::{Point2, Pose2};
use crate::icp::IcpConfig;
use crate::map::{build_map, MapKeyframe, MapStore, NearestPoseHints, TableHints, DEFAULT_KEYFRAME_SPACING};
use crate::pipeline::{localise_frame, run_sequence, FrameEstimate};
use crate::seeds::derive_seed;
use crate::world::{
    generate_world, render_true_boundaries, sample_trajectory, OcclusionEvent, OrientedBox, PassParams, Trajectory,
    WorldModel, WorldParams,
};

/// Everything needed to regenerate an experiment. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldParams,
    pub map_pass: PassParams,
    pub live_pass: PassParams,
    pub map_detection: DegradationParams,
    pub live_detection: DegradationParams,
    pub icp: IcpConfig,
    pub keyframe_spacing_m: f64,
    /// Along-track shift applied to the simulated hint query.
    pub hint_along_track_offset_m: f64,
    pub modes: Vec<DetectionMode>,
    /// Sensor position in the vehicle frame.
    pub sensor_origin: Point2,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldParams::default(),
            map_pass: PassParams {
                rate_hz: 10.0,
                ..PassParams::default()
            },
            live_pass: PassParams {
                lateral_noise_sigma_m: 0.3,
                ..PassParams::default()
            },
            map_detection: DegradationParams::default(),
            live_detection: DegradationParams::default(),
            icp: IcpConfig::default(),
            keyframe_spacing_m: DEFAULT_KEYFRAME_SPACING,
            hint_along_track_offset_m: 0.0,
            modes: vec![DetectionMode::VisibleOnly, DetectionMode::VisibleAndOccluded],
            sensor_origin: [0.0, 0.0],
            seed: 1,
            output_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.world.validate().map_err(cfg)?;
        for pass in [&self.map_pass, &self.live_pass] {
            if !(pass.speed_mps > 0.0 && pass.rate_hz > 0.0 && pass.lateral_noise_sigma_m >= 0.0) {
                return Err(Error::Config("pass speed and rate must be positive, noise non-negative".into()));
            }
            if pass.speed_mps > pass.max_speed_mps {
                return Err(Error::Config("pass speed exceeds max_speed_mps".into()));
            }
        }
        self.map_detection.validate().map_err(cfg)?;
        self.live_detection.validate().map_err(cfg)?;
        self.icp.validate().map_err(cfg)?;
        if !(self.keyframe_spacing_m > 0.0) {
            return Err(Error::Config("keyframe_spacing_m must be positive".into()));
        }
        if !self.hint_along_track_offset_m.is_finite() || self.sensor_origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("hint offset and sensor origin must be finite".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Live pass with dense traffic: roughly a third of the boundary length
    /// inside the ROI is hidden on average.
    pub fn heavy_occlusion() -> Self {
        let mut c = Self::default();
        c.world.occluder_density_per_km = 120.0;
        c
    }

    /// [`ExperimentConfig::heavy_occlusion`] with spurious live detections
    /// of up to 30 % of each frame's boundary cells.
    pub fn heavy_occlusion_with_clutter() -> Self {
        let mut c = Self::heavy_occlusion();
        c.live_detection.clutter_max_fraction = 0.3;
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Applies `key.path=value` overrides. Values are parsed as JSON and fall
    /// back to a plain string; every path segment must already exist.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serialises");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let mut slot = &mut doc;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
            }
            *slot = value;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Seeds of the independent random streams of one map/live pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSeeds {
    pub world: u64,
    pub map_pass: u64,
    pub live_pass: u64,
    pub map_detection: u64,
    pub live_detection: u64,
}

impl PairSeeds {
    pub fn new(base: u64, pair: u64) -> Self {
        let s = derive_seed(base, pair);
        Self {
            world: derive_seed(s, 1),
            map_pass: derive_seed(s, 2),
            live_pass: derive_seed(s, 3),
            map_detection: derive_seed(s, 4),
            live_detection: derive_seed(s, 5),
        }
    }
}

/// A generated world with both passes driven and observed.
pub struct PairData {
    pub world: WorldModel,
    pub map_trajectory: Trajectory,
    pub live_trajectory: Trajectory,
    pub store: MapStore,
    /// Live observations in full mode; visible-only matching strips the
    /// occluded channel.
    pub live: Vec<BoundaryObservation>,
    pub hints: NearestPoseHints,
    /// Mean over live frames of the occluded share of true boundary length
    /// inside the ROI.
    pub live_occluded_fraction: f64,
}

pub fn generate_passes(config: &ExperimentConfig, seeds: PairSeeds) -> Result<(WorldModel, Trajectory, Trajectory)> {
    let world = generate_world(&config.world, seeds.world)?;
    let map = sample_trajectory(&world, &config.map_pass, 0.0, seeds.map_pass)?;
    let live = sample_trajectory(&world, &config.live_pass, world.live_time_offset_s, seeds.live_pass)?;
    Ok((world, map, live))
}

pub fn build_map_for(config: &ExperimentConfig, world: &WorldModel, map_trajectory: &Trajectory, seed: u64) -> Result<MapStore> {
    let oracle = OracleSource::new(world).with_sensor_origin(config.sensor_origin);
    let source = DegradedSource::new(oracle, config.map_detection.clone(), seed)?;
    build_map(map_trajectory, &source, config.keyframe_spacing_m)
}

pub fn observe_live(config: &ExperimentConfig, world: &WorldModel, live: &Trajectory, seed: u64) -> Result<Vec<BoundaryObservation>> {
    let oracle = OracleSource::new(world).with_sensor_origin(config.sensor_origin);
    let source = DegradedSource::new(oracle, config.live_detection.clone(), seed)?;
    live.samples()
        .iter()
        .map(|s| source.observe(&s.pose, s.timestamp, DetectionMode::VisibleAndOccluded))
        .collect()
}

pub fn occluded_fraction(world: &WorldModel, trajectory: &Trajectory, sensor_origin: Point2) -> f64 {
    let s = trajectory.samples();
    if s.is_empty() {
        return 0.0;
    }
    let sum: f64 = s
        .iter()
        .map(|x| render_true_boundaries(world, &x.pose, x.timestamp, sensor_origin).occluded_fraction())
        .sum();
    sum / s.len() as f64
}

pub fn prepare_pair(config: &ExperimentConfig, pair: u64) -> Result<PairData> {
    let seeds = PairSeeds::new(config.seed, pair);
    let (world, map_trajectory, live_trajectory) = generate_passes(config, seeds)?;
    let store = build_map_for(config, &world, &map_trajectory, seeds.map_detection)?;
    let live = observe_live(config, &world, &live_trajectory, seeds.live_detection)?;
    let hints = NearestPoseHints::new(live_trajectory.clone(), &store, config.hint_along_track_offset_m)?;
    let live_occluded_fraction = occluded_fraction(&world, &live_trajectory, config.sensor_origin);
    Ok(PairData { world, map_trajectory, live_trajectory, store, live, hints, live_occluded_fraction })
}

impl PairData {
    pub fn localise(&self, mode: DetectionMode, icp: &IcpConfig, workers: usize) -> Vec<FrameEstimate> {
        run_sequence(&self.live, &self.store, &self.hints, mode, icp, workers)
    }

    pub fn evaluate(&self, mode: DetectionMode, icp: &IcpConfig, workers: usize) -> Alignment {
        align_to_reference(&self.localise(mode, icp, workers), &self.live_trajectory)
    }
}

/// A matching configuration run on every pair of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteVariant {
    pub label: String,
    pub mode: DetectionMode,
    pub icp: IcpConfig,
}

impl SuiteVariant {
    pub fn new(label: impl Into<String>, mode: DetectionMode, icp: IcpConfig) -> Self {
        Self { label: label.into(), mode, icp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub variant: SuiteVariant,
    pub records: Vec<EvalRecord>,
    pub excluded: usize,
}

impl VariantOutcome {
    pub fn alignment(&self) -> Alignment {
        Alignment { records: self.records.clone(), excluded: self.excluded }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub pairs: usize,
    pub occluded_fractions: Vec<f64>,
    pub variants: Vec<VariantOutcome>,
}

impl SuiteOutcome {
    pub fn mean_occluded_fraction(&self) -> f64 {
        if self.occluded_fractions.is_empty() {
            0.0
        } else {
            self.occluded_fractions.iter().sum::<f64>() / self.occluded_fractions.len() as f64
        }
    }

    pub fn variant(&self, label: &str) -> Option<&VariantOutcome> {
        self.variants.iter().find(|v| v.variant.label == label)
    }
}

/// Prepares `pairs` independent map/live pairs (in parallel when
/// `config.workers > 1`) and runs every variant on each. Records are
/// concatenated in pair order.
pub fn run_suite(config: &ExperimentConfig, pairs: usize, variants: &[SuiteVariant]) -> Result<SuiteOutcome> {
    config.validate()?;
    let one = |pair: usize| -> Result<(f64, Vec<Alignment>)> {
        let data = prepare_pair(config, pair as u64)?;
        let per_variant = variants
            .iter()
            .map(|v| data.evaluate(v.mode, &v.icp, 1))
            .collect();
        Ok((data.live_occluded_fraction, per_variant))
    };
    let results: Vec<Result<(f64, Vec<Alignment>)>> = if config.workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| (0..pairs).into_par_iter().map(one).collect())
    } else {
        (0..pairs).map(one).collect()
    };

    let mut occluded_fractions = Vec::with_capacity(pairs);
    let mut variants_out: Vec<VariantOutcome> = variants
        .iter()
        .map(|v| VariantOutcome { variant: v.clone(), records: Vec::new(), excluded: 0 })
        .collect();
    for r in results {
        let (fraction, alignments) = r?;
        occluded_fractions.push(fraction);
        for (out, a) in variants_out.iter_mut().zip(alignments) {
            out.records.extend(a.records);
            out.excluded += a.excluded;
        }
    }
    Ok(SuiteOutcome { pairs, occluded_fractions, variants: variants_out })
}

/// A single keyframe on a bend whose right boundary ahead of the vehicle
/// was hidden by a parked vehicle during the map pass, and a live frame at
/// the same place with a clear view.
pub struct UnbalancedScenario {
    pub world: WorldModel,
    pub store: MapStore,
    pub hints: TableHints,
    pub live: BoundaryObservation,
    pub truth: Pose2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedParams {
    pub curvature: f64,
    /// Arc length from the keyframe to the blocker centre.
    pub blocker_ahead_m: f64,
    pub blocker_length_m: f64,
    /// Live vehicle offset from the keyframe, positive to the left.
    pub live_lateral_offset_m: f64,
}

impl Default for UnbalancedParams {
    fn default() -> Self {
        Self {
            curvature: 0.02,
            blocker_ahead_m: 6.0,
            blocker_length_m: 10.0,
            live_lateral_offset_m: 0.3,
        }
    }
}

pub fn unbalanced_map_scenario(params: &UnbalancedParams) -> Result<UnbalancedScenario> {
    let world_params = WorldParams {
        road_length_m: 200.0,
        curvature_min: params.curvature,
        curvature_max: params.curvature,
        occluder_density_per_km: 0.0,
        map_occluder_density_per_km: 0.0,
        ..WorldParams::default()
    };
    let mut world = generate_world(&world_params, 0)?;
    let s0 = 100.0;
    let lateral = -(world_params.lane_width_m / 2.0
        - world_params.occluder_edge_gap_m
        - world_params.occluder_width_m / 2.0);
    let at = world.centreline.offset_pose_at(s0 + params.blocker_ahead_m, lateral);
    let map_time = 1.0;
    let live_time = world.live_time_offset_s + 1.0;
    world.occluders.push(OcclusionEvent {
        shape: OrientedBox {
            centre: at.position(),
            length: params.blocker_length_m,
            width: world_params.occluder_width_m,
            yaw: at.yaw(),
        },
        active_from: 0.0,
        active_until: world.live_time_offset_s,
    });
    let source = OracleSource::new(&world);
    let keyframe_pose = world.centreline.pose_at(s0);
    let map_obs = source.observe(&keyframe_pose, map_time, DetectionMode::VisibleAndOccluded)?;
    let truth = world.centreline.offset_pose_at(s0, params.live_lateral_offset_m);
    let live = source.observe(&truth, live_time, DetectionMode::VisibleAndOccluded)?;
    let store = MapStore::from_keyframes(vec![MapKeyframe::new(keyframe_pose, map_obs)])?;
    let hints = TableHints::new(vec![(live_time, map_time)], &store)?;
    Ok(UnbalancedScenario { world, store, hints, live, truth })
}

impl UnbalancedScenario {
    pub fn localise(&self, mode: DetectionMode, icp: &IcpConfig) -> FrameEstimate {
        localise_frame(&self.live, &self.store, &self.hints, mode, icp)
    }
}
