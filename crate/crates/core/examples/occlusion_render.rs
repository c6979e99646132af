//! Rendering a synthetic road with parked vehicles and counting how much of
//! the boundary each one hides.
use roadloc::boundary::BoundarySource;
use roadloc::{generate_world, CellLabel, DetectionMode, OracleSource, WorldParams};

fn main() -> roadloc::Result<()> {
    let params = WorldParams { road_length_m: 300.0, occluder_density_per_km: 60.0, ..Default::default() };
    let world = generate_world(&params, 7)?;
    println!("{:.1} m of road, {} occluders", world.centreline.length(), world.occluders.len());

    let source = OracleSource::new(&world);
    for s in (20..=280).step_by(40) {
        let pose = world.centreline.pose_at(s as f64);
        let t = world.live_time_offset_s + 1.0;
        let full = source.observe(&pose, t, DetectionMode::VisibleAndOccluded)?;
        let visible = source.observe(&pose, t, DetectionMode::VisibleOnly)?;
        let v = full.grid.count(CellLabel::VisibleBoundary);
        let o = full.grid.count(CellLabel::OccludedBoundary);
        assert_eq!(visible.grid, full.grid.visible_only());
        println!(
            "s={s:3} m: {v:4} visible cells, {o:4} occluded ({:.0}% hidden)",
            100.0 * o as f64 / (v + o).max(1) as f64
        );
    }
    Ok(())
}
