//! End to end on one world: build a map from the first pass, localise every
//! frame of the second pass in both detection modes and write a report.
use roadloc::eval::{compare, emit_report, summarise, Summary, SUMMARY_FORMAT_VERSION};
use roadloc::experiment::{prepare_pair, ExperimentConfig};
use roadloc::DetectionMode;

fn main() -> anyhow::Result<()> {
    let mut config = ExperimentConfig::heavy_occlusion();
    config.world.road_length_m = 300.0;
    let pair = prepare_pair(&config, 0)?;
    println!(
        "{} keyframes, {} live frames, {:.1}% of boundary occluded",
        pair.store.len(),
        pair.live.len(),
        100.0 * pair.live_occluded_fraction
    );

    let mut modes = Vec::new();
    let mut records = Vec::new();
    for mode in [DetectionMode::VisibleOnly, DetectionMode::VisibleAndOccluded] {
        let alignment = pair.evaluate(mode, &config.icp, 1);
        let s = summarise(mode.as_str(), &alignment);
        println!(
            "{:22} mean lateral {:.4} m, mean yaw {:.4} rad, {} failed",
            s.label,
            s.mean_lateral.unwrap_or(f64::NAN),
            s.mean_yaw.unwrap_or(f64::NAN),
            s.failed
        );
        for row in &s.table.rows {
            println!("    < {:.1} m: {:5.1}%", row.threshold, row.percentage);
        }
        modes.push(s);
        records.push(alignment.records);
    }

    let comparison = Some(compare(&modes[0], &modes[1]));
    let summary = Summary { format_version: SUMMARY_FORMAT_VERSION, modes, comparison };
    let out = std::env::temp_dir().join("roadloc_report");
    let labels = ["visible_only", "visible_and_occluded"];
    let pairs: Vec<(&str, &[_])> = labels.iter().copied().zip(records.iter().map(Vec::as_slice)).collect();
    emit_report(&out, &summary, &pairs)?;
    println!("report written to {}", out.display());
    Ok(())
}
