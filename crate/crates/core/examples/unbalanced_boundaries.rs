//! A single frame on a curved road where the keyframe saw only the outer
//! boundary near the vehicle. Matching visible points alone lets the scan
//! rotate along the curve; adding occluded points pins it.
use roadloc::experiment::{unbalanced_map_scenario, UnbalancedParams};
use roadloc::geometry::{cross_track_error, yaw_error};
use roadloc::{CellLabel, DetectionMode, IcpConfig};

fn main() -> roadloc::Result<()> {
    let scenario = unbalanced_map_scenario(&UnbalancedParams::default())?;
    let kf = &scenario.store.keyframes()[0];
    println!(
        "keyframe grid: {} visible, {} occluded cells",
        kf.observation.grid.count(CellLabel::VisibleBoundary),
        kf.observation.grid.count(CellLabel::OccludedBoundary)
    );
    for mode in [DetectionMode::VisibleOnly, DetectionMode::VisibleAndOccluded] {
        let est = scenario.localise(mode, &IcpConfig::default());
        match est.estimated_pose {
            Some(pose) => println!(
                "{mode}: lateral {:.4} m, yaw {:.4} rad ({:?})",
                cross_track_error(&pose, &scenario.truth),
                yaw_error(&pose, &scenario.truth),
                est.status
            ),
            None => println!("{mode}: no estimate ({:?})", est.status),
        }
    }
    Ok(())
}
