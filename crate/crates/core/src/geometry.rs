//! SE(2) pose algebra, error decomposition and pose interpolation.
//!
//! Angles are radians, counter-clockwise positive, and always wrapped to
//! `(-π, π]`. A [`Pose2`] is a vehicle pose in some fixed frame; a
//! [`Transform2`] is a rigid correction between two frames. Both are
//! immutable values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point in metres.
pub type Point2 = [f64; 2];

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// SE(2) vehicle pose (world frame unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose2 {
    x: f64,
    y: f64,
    yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    x: f64,
    y: f64,
    yaw: f64,
}

impl TryFrom<PoseRepr> for Pose2 {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose2::try_new(r.x, r.y, r.yaw)
    }
}

impl From<Pose2> for PoseRepr {
    fn from(p: Pose2) -> Self {
        PoseRepr {
            x: p.x,
            y: p.y,
            yaw: p.yaw,
        }
    }
}

impl Pose2 {
    /// Builds a pose, wrapping `yaw`.
    ///
    /// Panics if any component is not finite; use [`Pose2::try_new`] for
    /// untrusted input.
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self::try_new(x, y, yaw).expect("pose components must be finite")
    }

    pub fn try_new(x: f64, y: f64, yaw: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && yaw.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite pose ({x}, {y}, {yaw})"
            )));
        }
        Ok(Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        })
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn position(&self) -> Point2 {
        [self.x, self.y]
    }

    /// The transform taking vehicle-frame points into the pose's parent frame.
    pub fn to_transform(&self) -> Transform2 {
        Transform2::new(self.x, self.y, self.yaw)
    }

    pub fn from_transform(t: &Transform2) -> Self {
        Self::new(t.tx, t.ty, t.dtheta)
    }

    /// Applies a correction expressed in this pose's frame: `self ∘ t`.
    pub fn compose(&self, t: &Transform2) -> Pose2 {
        Pose2::from_transform(&self.to_transform().compose(t))
    }

    /// The transform `self⁻¹ ∘ other`, i.e. `other` expressed in this pose's frame.
    pub fn between(&self, other: &Pose2) -> Transform2 {
        self.to_transform().inverse().compose(&other.to_transform())
    }

    /// Expresses a parent-frame point in this pose's frame.
    pub fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Maps a vehicle-frame point into the parent frame.
    pub fn to_world(&self, p: Point2) -> Point2 {
        self.to_transform().apply(p)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rigid SE(2) transform. ICP results use the `map_from_live` convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct Transform2 {
    tx: f64,
    ty: f64,
    dtheta: f64,
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    tx: f64,
    ty: f64,
    dtheta: f64,
}

impl TryFrom<TransformRepr> for Transform2 {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        if !(r.tx.is_finite() && r.ty.is_finite() && r.dtheta.is_finite()) {
            return Err(Error::Domain("non-finite transform".into()));
        }
        Ok(Transform2::new(r.tx, r.ty, r.dtheta))
    }
}

impl From<Transform2> for TransformRepr {
    fn from(t: Transform2) -> Self {
        TransformRepr {
            tx: t.tx,
            ty: t.ty,
            dtheta: t.dtheta,
        }
    }
}

impl Default for Transform2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform2 {
    pub fn new(tx: f64, ty: f64, dtheta: f64) -> Self {
        Self {
            tx,
            ty,
            dtheta: wrap_angle(dtheta),
        }
    }

    pub fn identity() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            dtheta: 0.0,
        }
    }

    pub fn tx(&self) -> f64 {
        self.tx
    }

    pub fn ty(&self) -> f64 {
        self.ty
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// `R(dtheta)·p + (tx, ty)`.
    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.dtheta.sin_cos();
        [c * p[0] - s * p[1] + self.tx, s * p[0] + c * p[1] + self.ty]
    }

    /// `self ∘ b`: apply `b` first, then `self`.
    pub fn compose(&self, b: &Transform2) -> Transform2 {
        let [tx, ty] = self.apply([b.tx, b.ty]);
        Transform2::new(tx, ty, self.dtheta + b.dtheta)
    }

    pub fn inverse(&self) -> Transform2 {
        let (s, c) = self.dtheta.sin_cos();
        Transform2::new(
            -(c * self.tx + s * self.ty),
            -(-s * self.tx + c * self.ty),
            -self.dtheta,
        )
    }

    pub fn translation_norm(&self) -> f64 {
        self.tx.hypot(self.ty)
    }
}

/// Signed lateral offset of `estimated` in the frame of `reference`
/// (positive = left of the reference heading).
pub fn cross_track_error(estimated: &Pose2, reference: &Pose2) -> f64 {
    reference.to_local(estimated.position())[1]
}

/// `wrap(estimated.yaw − reference.yaw)`.
pub fn yaw_error(estimated: &Pose2, reference: &Pose2) -> f64 {
    wrap_angle(estimated.yaw - reference.yaw)
}

/// Interpolates between two poses: linear in position, shortest arc in yaw.
/// `s = 0` and `s = 1` return the endpoints exactly.
pub fn interpolate_pose(t0: &Pose2, t1: &Pose2, s: f64) -> Result<Pose2> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!(
            "interpolation fraction {s} outside [0, 1]"
        )));
    }
    if s == 0.0 {
        return Ok(*t0);
    }
    if s == 1.0 {
        return Ok(*t1);
    }
    let arc = wrap_angle(t1.yaw - t0.yaw);
    Ok(Pose2::new(
        t0.x + s * (t1.x - t0.x),
        t0.y + s * (t1.y - t0.y),
        t0.yaw + s * arc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < EPS
    }

    fn same_angle(a: f64, b: f64) -> bool {
        wrap_angle(a - b).abs() < EPS
    }

    fn same_transform(a: &Transform2, b: &Transform2) -> bool {
        close(a.tx, b.tx) && close(a.ty, b.ty) && same_angle(a.dtheta, b.dtheta)
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!(close(wrap_angle(3.0 * PI / 2.0), -PI / 2.0));
        assert!(close(wrap_angle(-7.0), -7.0 + 2.0 * PI));
    }

    #[test]
    fn compose_examples() {
        let t = Transform2::new(0.3, -1.2, 0.7);
        assert!(same_transform(&Transform2::identity().compose(&t), &t));
        assert!(same_transform(
            &t.compose(&t.inverse()),
            &Transform2::identity()
        ));
        let a = Transform2::new(1.0, 0.0, PI / 2.0);
        let b = Transform2::new(1.0, 0.0, 0.0);
        assert!(same_transform(
            &a.compose(&b),
            &Transform2::new(1.0, 1.0, PI / 2.0)
        ));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(Transform2::identity().apply([3.0, 4.0]), [3.0, 4.0]);
        let p = Transform2::new(0.0, 0.0, PI).apply([1.0, 0.0]);
        assert!(close(p[0], -1.0) && close(p[1], 0.0));
        let p = Transform2::new(1.0, 2.0, PI / 2.0).apply([1.0, 0.0]);
        assert!(close(p[0], 1.0) && close(p[1], 3.0));
    }

    /// Frame change via an explicit rotation matrix and its transpose.
    fn matrix_cross_track(est: &Pose2, reference: &Pose2) -> f64 {
        let r = [
            [reference.yaw.cos(), -reference.yaw.sin()],
            [reference.yaw.sin(), reference.yaw.cos()],
        ];
        let d = [est.x - reference.x, est.y - reference.y];
        // second row of Rᵀ·d
        r[0][1] * d[0] + r[1][1] * d[1]
    }

    #[test]
    fn cross_track_examples() {
        let p = Pose2::new(2.0, -1.0, 0.4);
        assert_eq!(cross_track_error(&p, &p), 0.0);
        assert!(close(
            cross_track_error(&Pose2::new(5.0, 0.3, 0.0), &Pose2::identity()),
            0.3
        ));
        let reference = Pose2::new(0.0, 0.0, PI / 2.0);
        let est = Pose2::new(-0.2, 7.0, 0.0);
        assert!(close(cross_track_error(&est, &reference), 0.2));
        assert!(close(matrix_cross_track(&est, &reference), 0.2));
        assert!(close(yaw_error(&est, &reference), -PI / 2.0));
    }

    #[test]
    fn interpolation_examples() {
        let a = Pose2::new(0.0, 0.0, 0.0);
        let b = Pose2::new(2.0, 4.0, 0.0);
        assert_eq!(interpolate_pose(&a, &b, 0.0).unwrap(), a);
        assert_eq!(interpolate_pose(&a, &b, 1.0).unwrap(), b);
        let m = interpolate_pose(&a, &b, 0.5).unwrap();
        assert!(close(m.x(), 1.0) && close(m.y(), 2.0) && close(m.yaw(), 0.0));
        assert!(matches!(
            interpolate_pose(&a, &b, 1.5),
            Err(Error::Domain(_))
        ));
        assert!(interpolate_pose(&a, &b, -0.1).is_err());
    }

    #[test]
    fn interpolation_crosses_pi_on_short_arc() {
        let a = Pose2::new(0.0, 0.0, 3.0);
        let b = Pose2::new(0.0, 0.0, -3.0);
        let mid = interpolate_pose(&a, &b, 0.5).unwrap();
        // brute force: the midpoint heading minimising max arc to both ends
        let best = (0..200_000)
            .map(|i| -PI + 2.0 * PI * i as f64 / 200_000.0)
            .min_by(|x, y| {
                let cost = |h: f64| wrap_angle(h - 3.0).abs().max(wrap_angle(h + 3.0).abs());
                cost(*x).partial_cmp(&cost(*y)).unwrap()
            })
            .unwrap();
        assert!(wrap_angle(mid.yaw() - best).abs() < 1e-4);
        assert!((mid.yaw().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Pose2::try_new(f64::NAN, 0.0, 0.0).is_err());
        let bad: std::result::Result<Pose2, _> =
            serde_json::from_str(r#"{"x":1.0,"y":2.0,"yaw":1e400}"#);
        assert!(bad.is_err());
        let p: Pose2 = serde_json::from_str(r#"{"x":1.0,"y":2.0,"yaw":7.0}"#).unwrap();
        assert!(close(p.yaw(), 7.0 - 2.0 * PI));
    }

    fn transform() -> impl Strategy<Value = Transform2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64)
            .prop_map(|(x, y, t)| Transform2::new(x, y, t))
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in transform(), b in transform(), c in transform()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.tx - r.tx).abs() < 1e-9 && (l.ty - r.ty).abs() < 1e-9);
            prop_assert!(same_angle(l.dtheta, r.dtheta));
        }

        #[test]
        fn inverse_cancels(a in transform()) {
            prop_assert!(same_transform(&a.compose(&a.inverse()), &Transform2::identity()));
            prop_assert!(same_transform(&a.inverse().compose(&a), &Transform2::identity()));
            prop_assert!(a.dtheta > -PI && a.dtheta <= PI);
        }

        #[test]
        fn cross_track_is_rigid_invariant(e in pose(), r in pose(), g in transform()) {
            let before = cross_track_error(&e, &r);
            let after = cross_track_error(
                &Pose2::from_transform(&g.compose(&e.to_transform())),
                &Pose2::from_transform(&g.compose(&r.to_transform())),
            );
            prop_assert!((before - after).abs() < 1e-9);
            prop_assert!((before - matrix_cross_track(&e, &r)).abs() < 1e-9);
        }

        #[test]
        fn interpolation_takes_short_arc(a in pose(), b in pose(), s in 0.0..=1.0f64) {
            let m = interpolate_pose(&a, &b, s).unwrap();
            let arc = wrap_angle(m.yaw() - a.yaw()).abs();
            prop_assert!(arc <= PI * s + 1e-12);
        }
    }
}
