//! Pose composition, inverse transforms and the lateral/yaw error metrics.
use roadloc::geometry::{cross_track_error, interpolate_pose, yaw_error};
use roadloc::{Pose2, Transform2};

fn main() -> roadloc::Result<()> {
    let keyframe = Pose2::new(10.0, 5.0, 0.4);
    // live frame sits 0.3 m to the left of the keyframe and slightly rotated
    let offset = Transform2::new(0.0, 0.3, 0.02);
    let live = keyframe.compose(&offset);
    println!("keyframe {keyframe:?}");
    println!("live     {live:?}");

    let back = keyframe.between(&live);
    println!("recovered offset {back:?}");
    println!("inverse round trip {:?}", offset.compose(&offset.inverse()));

    println!("lateral error {:.4} m", cross_track_error(&live, &keyframe));
    println!("yaw error {:.4} rad", yaw_error(&live, &keyframe));

    let wrap = Pose2::new(0.0, 0.0, 3.1).compose(&Transform2::new(0.0, 0.0, 0.1));
    println!("yaw wraps to {:.4}", wrap.yaw());

    for s in [0.0, 0.25, 0.5, 1.0] {
        let p = interpolate_pose(&keyframe, &live, s)?;
        println!("s={s:.2}: ({:.3}, {:.3}, {:.4})", p.x(), p.y(), p.yaw());
    }
    Ok(())
}
