//! Multi-pair suite comparing detection modes and the trimmed matcher under
//! heavy occlusion with injected clutter. Pass the number of pairs as the
//! first argument.
use std::time::Instant;

use roadloc::eval::summarise;
use roadloc::experiment::{run_suite, ExperimentConfig, SuiteVariant};
use roadloc::{DetectionMode, IcpConfig};

fn main() -> anyhow::Result<()> {
    let pairs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let mut config = ExperimentConfig::heavy_occlusion_with_clutter();
    config.world.road_length_m = 400.0;
    config.workers = std::thread::available_parallelism().map_or(1, |n| n.get());

    let trimmed = IcpConfig::worst_rejection();
    let variants = [
        SuiteVariant::new("visible", DetectionMode::VisibleOnly, config.icp.clone()),
        SuiteVariant::new("visible+occluded", DetectionMode::VisibleAndOccluded, config.icp.clone()),
        SuiteVariant::new("visible trimmed", DetectionMode::VisibleOnly, trimmed.clone()),
        SuiteVariant::new("visible+occluded trimmed", DetectionMode::VisibleAndOccluded, trimmed),
    ];

    let start = Instant::now();
    let outcome = run_suite(&config, pairs, &variants)?;
    println!(
        "{pairs} pairs in {:.1?}, mean occluded fraction {:.1}%",
        start.elapsed(),
        100.0 * outcome.mean_occluded_fraction()
    );
    for v in &outcome.variants {
        let s = summarise(&v.variant.label, &v.alignment());
        println!(
            "{:26} frames {:5} failed {:3}  lateral {:.4}  yaw {:.4}  after 10% frame rejection {:.4}",
            s.label,
            s.frames,
            s.failed,
            s.mean_lateral.unwrap_or(f64::NAN),
            s.mean_yaw.unwrap_or(f64::NAN),
            s.frame_rejection.mean_lateral.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
