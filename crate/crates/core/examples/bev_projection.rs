//! Dual-sensor point clouds fused into a bird's-eye-view boundary grid,
//! written out as a PGM image.
use std::f64::consts::FRAC_PI_2;

use roadloc::bev::{fuse_dual_sensor, grid_to_points, Extrinsics6, HeightBand, Point3};
use roadloc::{BevGrid, CellLabel};

fn kerb(y: f64) -> Vec<Point3> {
    (0..400).map(|i| [-10.0 + i as f64 * 0.05, y, 0.1]).collect()
}

fn main() -> anyhow::Result<()> {
    // each sensor is mounted 1 m to the side, rotated a quarter turn outwards
    let left_ext = Extrinsics6 { translation: [0.0, 1.0, 0.0], yaw: FRAC_PI_2, ..Default::default() };
    let right_ext = Extrinsics6 { translation: [0.0, -1.0, 0.0], yaw: -FRAC_PI_2, ..Default::default() };

    // sensor-frame clouds: the kerb appears along the sensor x axis
    let to_sensor = |pts: Vec<Point3>, y0: f64, sign: f64| -> Vec<Point3> {
        pts.into_iter().map(|p| [sign * (p[1] - y0), -sign * p[0], p[2]]).collect()
    };
    let mut left = to_sensor(kerb(3.5), 1.0, 1.0);
    let right = to_sensor(kerb(-3.5), -1.0, -1.0);
    // overhanging foliage that the height band removes
    left.extend((0..50).map(|i| [1.0, i as f64 * 0.1, 2.5]));

    let band = HeightBand::new(-0.3, 0.5)?;
    let grid = fuse_dual_sensor(&left, &right, &left_ext, &right_ext, &band);
    println!("visible boundary cells: {}", grid.count(CellLabel::VisibleBoundary));

    let cloud = grid_to_points(&grid, true);
    let ys: Vec<f64> = cloud.points().iter().map(|p| p[1]).collect();
    let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
    println!("{} boundary points, y in [{lo:.3}, {hi:.3}]", cloud.len());

    let out = std::env::temp_dir().join("roadloc_bev.pgm");
    grid.write_pgm(&out)?;
    let back = BevGrid::read_pgm(&out)?;
    println!("wrote {} ({} cells read back)", out.display(), back.boundary_count());
    Ok(())
}
