//! Point-to-point ICP on a corner-rich cloud, with and without trimming
//! when a share of the live points is clutter.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roadloc::{icp_align, BoundaryCloud, IcpConfig, Point2, Transform2};

fn corners() -> Vec<Point2> {
    let mut pts = Vec::new();
    for k in 0..16 {
        let c = [-6.0 + 4.0 * (k % 4) as f64, -6.0 + 4.0 * (k / 4) as f64];
        let (s, co) = (k as f64 * 2.399963).sin_cos();
        for i in 0..20 {
            let d = i as f64 * 0.05;
            pts.push([c[0] + co * d, c[1] + s * d]);
            pts.push([c[0] - s * d * 0.7, c[1] + co * d * 0.7]);
        }
    }
    pts
}

fn main() -> roadloc::Result<()> {
    let map = corners();
    let truth = Transform2::new(0.25, -0.15, 0.04);
    // live points are the map seen from the offset pose
    let live: Vec<Point2> = map.iter().map(|p| truth.inverse().apply(*p)).collect();

    let map_cloud = BoundaryCloud::from_points(map)?;
    let clean = BoundaryCloud::from_points(live.clone())?;
    let r = icp_align(&clean, &map_cloud, Transform2::identity(), &IcpConfig::default())?;
    println!("clean:   {:?} after {} iterations, rms {:.5}", r.transform, r.iterations, r.mean_residual);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut noisy = live;
    let n = noisy.len() / 4;
    for _ in 0..n {
        noisy.push([rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)]);
    }
    let noisy = BoundaryCloud::from_points(noisy)?;
    for (name, cfg) in [("plain", IcpConfig::default()), ("trimmed", IcpConfig::worst_rejection())] {
        let r = icp_align(&noisy, &map_cloud, Transform2::identity(), &cfg)?;
        let err = truth.inverse().compose(&r.transform);
        println!(
            "{name:8} translation error {:.4} m, rotation error {:.5} rad, {} inliers",
            err.translation_norm(),
            err.dtheta().abs(),
            r.inlier_count
        );
    }
    println!("truth:   {truth:?}");
    Ok(())
}
