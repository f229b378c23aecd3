//! Point types and planar rigid transforms.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Horizontal projection.
    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub(crate) fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product of the two vectors.
    pub fn cross(&self, other: &Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (*self - *other).norm()
    }

    /// Counter-clockwise quarter turn, `P = ((0, -1), (1, 0))`.
    pub fn perp(&self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn rotated(&self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Arithmetic mean; `None` for an empty input.
pub fn centroid<'a, I: IntoIterator<Item = &'a Point2>>(points: I) -> Option<Point2> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        sx += p.x;
        sy += p.y;
        n += 1;
    }
    (n > 0).then(|| Point2::new(sx / n as f64, sy / n as f64))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud3 {
    pub points: Vec<Point3>,
}

impl PointCloud3 {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud3 { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }
}

impl FromIterator<Point3> for PointCloud3 {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        PointCloud3::new(iter.into_iter().collect())
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Signed difference `a - b` wrapped into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// A planar rotation by `theta` followed by a translation `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub theta: f64,
    pub t: Point2,
}

impl Default for RigidTransform2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform2D {
    pub fn new(theta: f64, t: Point2) -> Self {
        RigidTransform2D {
            theta: normalize_angle(theta),
            t,
        }
    }

    pub const fn identity() -> Self {
        RigidTransform2D {
            theta: 0.0,
            t: Point2::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotated(self.theta) + self.t
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform2D) -> RigidTransform2D {
        RigidTransform2D::new(self.theta + other.theta, self.apply(other.t))
    }

    pub fn inverse(&self) -> RigidTransform2D {
        RigidTransform2D::new(-self.theta, (self.t * -1.0).rotated(-self.theta))
    }

    pub fn heading_deg(&self) -> f64 {
        self.theta.to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apply_examples() {
        let p = RigidTransform2D::identity().apply(Point2::new(3.0, 4.0));
        assert_eq!(p, Point2::new(3.0, 4.0));

        let q = RigidTransform2D::new(PI / 2.0, Point2::new(0.0, 0.0)).apply(Point2::new(1.0, 0.0));
        assert!((q.x - 0.0).abs() < 1e-15 && (q.y - 1.0).abs() < 1e-15);

        let r = RigidTransform2D::new(PI / 2.0, Point2::new(1.0, 1.0)).apply(Point2::new(1.0, 0.0));
        assert!((r.x - 1.0).abs() < 1e-15 && (r.y - 2.0).abs() < 1e-15);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            RigidTransform2D::identity().inverse(),
            RigidTransform2D::identity()
        );
        let t = RigidTransform2D::new(PI / 2.0, Point2::new(1.0, 0.0));
        let inv = t.inverse();
        for p in [Point2::new(2.0, -3.0), Point2::new(0.5, 7.25)] {
            let back = inv.apply(t.apply(p));
            assert!(back.distance(&p) < 1e-12);
        }
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    fn transform() -> impl Strategy<Value = RigidTransform2D> {
        (-10.0..10.0f64, -1e3..1e3f64, -1e3..1e3f64)
            .prop_map(|(th, x, y)| RigidTransform2D::new(th, Point2::new(x, y)))
    }

    fn point() -> impl Strategy<Value = Point2> {
        (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(x, y)| Point2::new(x, y))
    }

    proptest! {
        #[test]
        fn isometry(t in transform(), p in point(), q in point()) {
            let d = p.distance(&q);
            let dt = t.apply(p).distance(&t.apply(q));
            prop_assert!((dt - d).abs() <= 1e-9 * d.max(1e-3));
        }

        #[test]
        fn round_trip(t in transform(), pts in prop::collection::vec(point(), 10)) {
            let inv = t.inverse();
            for p in pts {
                prop_assert!(inv.apply(t.apply(p)).distance(&p) <= 1e-9);
            }
            let id = inv.compose(&t);
            prop_assert!(id.theta.abs() < 1e-12);
            prop_assert!(id.t.norm() < 1e-9);
        }

        #[test]
        fn composition_associative(a in transform(), b in transform(), c in transform(), p in point()) {
            let left = a.compose(&b).compose(&c).apply(p);
            let right = a.compose(&b.compose(&c)).apply(p);
            prop_assert!(left.distance(&right) <= 1e-8);
        }

        #[test]
        fn compose_matches_sequential_application(a in transform(), b in transform(), p in point()) {
            let seq = a.apply(b.apply(p));
            prop_assert!(a.compose(&b).apply(p).distance(&seq) <= 1e-9);
            let th = a.compose(&b).theta;
            prop_assert!(th > -PI && th <= PI);
        }
    }
}
