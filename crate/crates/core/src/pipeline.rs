//! Per-frame localisation: hint → keyframe → ICP → corrected world pose.
//!
//! The ICP transform is `map_from_live`, so the live vehicle pose in the
//! world is `keyframe.reference_pose ∘ transform`. For example, a keyframe at
//! `(10, 0, 0)` and a live frame whose boundaries appear 0.4 m further right
//! (vehicle 0.4 m to the left) yield a transform of about `(0, 0.4, 0)` and
//! an estimated pose of `(10, 0.4, 0)`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bev::grid_to_points;
use crate::boundary::{BoundaryObservation, DetectionMode};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Transform2};
use crate::icp::{icp_align_indexed, IcpConfig, IcpResult};
use crate::map::{HintProvider, MapStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    NoOverlap,
    NotConverged,
}

/// Outcome of localising one live frame. `estimated_pose` is present for
/// `ok` and `not_converged` (last iterate) frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub live_timestamp: f64,
    pub map_timestamp: Option<f64>,
    pub mode: DetectionMode,
    pub icp: Option<IcpResult>,
    pub estimated_pose: Option<Pose2>,
    pub status: FrameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl FrameEstimate {
    fn failed(live_obs: &BoundaryObservation, mode: DetectionMode, map_ts: Option<f64>, why: String) -> Self {
        Self {
            live_timestamp: live_obs.timestamp,
            map_timestamp: map_ts,
            mode,
            icp: None,
            estimated_pose: None,
            status: FrameStatus::NoOverlap,
            diagnostic: Some(why),
        }
    }
}

/// Localises a single live observation. Failures are recorded in the
/// returned status rather than propagated.
pub fn localise_frame(
    live_obs: &BoundaryObservation,
    store: &MapStore,
    provider: &dyn HintProvider,
    mode: DetectionMode,
    config: &IcpConfig,
) -> FrameEstimate {
    let map_ts = match provider.lookup(live_obs.timestamp) {
        Ok(t) => t,
        Err(e) => return FrameEstimate::failed(live_obs, mode, None, format!("hint lookup: {e}")),
    };
    let Some(keyframe) = store.keyframe_at(map_ts) else {
        return FrameEstimate::failed(live_obs, mode, Some(map_ts), "hint names a missing keyframe".into());
    };
    let live_cloud = grid_to_points(&live_obs.grid, mode.includes_occluded());
    if live_cloud.is_empty() || keyframe.cloud(mode).is_empty() {
        return FrameEstimate::failed(live_obs, mode, Some(map_ts), "empty boundary cloud".into());
    }
    match icp_align_indexed(&live_cloud, keyframe.index(mode), Transform2::identity(), config) {
        Ok(icp) => {
            let pose = keyframe.reference_pose.compose(&icp.transform);
            let status = if icp.converged {
                FrameStatus::Ok
            } else {
                FrameStatus::NotConverged
            };
            FrameEstimate {
                live_timestamp: live_obs.timestamp,
                map_timestamp: Some(map_ts),
                mode,
                icp: Some(icp),
                estimated_pose: Some(pose),
                status,
                diagnostic: None,
            }
        }
        Err(e) => FrameEstimate::failed(live_obs, mode, Some(map_ts), e.to_string()),
    }
}

/// Localises every live frame, preserving input order. `workers > 1` fans
/// out over a dedicated thread pool; output is identical either way.
pub fn run_sequence(
    live: &[BoundaryObservation],
    store: &MapStore,
    provider: &dyn HintProvider,
    mode: DetectionMode,
    config: &IcpConfig,
    workers: usize,
) -> Vec<FrameEstimate> {
    let one = |obs: &BoundaryObservation| localise_frame(obs, store, provider, mode, config);
    if workers <= 1 {
        return live.iter().map(one).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| live.par_iter().map(one).collect()),
        Err(_) => live.iter().map(one).collect(),
    }
}

/// Writes one JSON object per line.
pub fn write_estimates(path: &Path, estimates: &[FrameEstimate]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in estimates {
        let line = serde_json::to_string(e).expect("estimate serialises");
        writeln!(w, "{line}").map_err(|err| Error::io(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_estimates(path: &Path) -> Result<Vec<FrameEstimate>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let e: FrameEstimate = serde_json::from_str(&line)
            .map_err(|err| Error::format(path, format!("line {}: {err}", i + 1)))?;
        out.push(e);
    }
    Ok(out)
}
