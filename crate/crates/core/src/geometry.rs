//! Planar geometry for the kinematic simulator: vectors, oriented rectangles,
//! separating-axis overlap tests.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

/// Overlaps at or below this depth count as touching, not penetrating.
pub const CONTACT_EPS: f64 = 1e-9;

/// A point or displacement in the task plane.
///
/// `a` and `b` are the two task axes: (x, y) in the top-view pick-place
/// scene, (y, z) in the side-view shelf scenes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub a: f64,
    pub b: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { a: 0.0, b: 0.0 };

    pub const fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn norm(self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.a * other.a + self.b * other.b
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        if angle == 0.0 {
            return self;
        }
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.a - s * self.b, s * self.a + c * self.b)
    }

    /// Exact rotation by a multiple of a quarter turn.
    pub fn rotate_quarter(self, quarter_turns: i32) -> Vec2 {
        match quarter_turns.rem_euclid(4) {
            0 => self,
            1 => Vec2::new(-self.b, self.a),
            2 => Vec2::new(-self.a, -self.b),
            _ => Vec2::new(self.b, -self.a),
        }
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    /// Component along axis 0 (`a`) or 1 (`b`).
    pub fn axis(self, axis: Axis) -> f64 {
        match axis {
            Axis::A => self.a,
            Axis::B => self.b,
        }
    }

    pub fn with_axis(self, axis: Axis, value: f64) -> Vec2 {
        match axis {
            Axis::A => Vec2::new(value, self.b),
            Axis::B => Vec2::new(self.a, value),
        }
    }

    pub fn unit(axis: Axis, sign: f64) -> Vec2 {
        Vec2::ZERO.with_axis(axis, sign)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.a + rhs.a, self.b + rhs.b)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.a - rhs.a, self.b - rhs.b)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.a, -self.b)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.a * k, self.b * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    A,
    B,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::A => Axis::B,
            Axis::B => Axis::A,
        }
    }
}

/// Normalizes an angle into (-π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut x = angle.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Axis-aligned bounds `[min, max]` on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    /// Signed overlap along one axis; positive means the intervals intersect.
    pub fn overlap_on(&self, other: &Aabb, axis: Axis) -> f64 {
        self.max.axis(axis).min(other.max.axis(axis))
            - self.min.axis(axis).max(other.min.axis(axis))
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.overlap_on(other, Axis::A) > CONTACT_EPS
            && self.overlap_on(other, Axis::B) > CONTACT_EPS
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.a >= self.min.a && p.a <= self.max.a && p.b >= self.min.b && p.b <= self.max.b
    }
}

/// An oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Vec2,
    pub half_extents: Vec2,
    /// Radians in (-π, π].
    pub angle: f64,
}

impl Rect {
    pub fn new(center: Vec2, half_extents: Vec2) -> Self {
        Self {
            center,
            half_extents,
            angle: 0.0,
        }
    }

    pub fn rotated(center: Vec2, half_extents: Vec2, angle: f64) -> Self {
        Self {
            center,
            half_extents,
            angle: normalize_angle(angle),
        }
    }

    /// Builds an axis-aligned rectangle from its corner coordinates.
    pub fn from_bounds(min_a: f64, min_b: f64, max_a: f64, max_b: f64) -> Self {
        Self::new(
            Vec2::new(0.5 * (min_a + max_a), 0.5 * (min_b + max_b)),
            Vec2::new(0.5 * (max_a - min_a), 0.5 * (max_b - min_b)),
        )
    }

    pub fn translated(&self, d: Vec2) -> Rect {
        Rect {
            center: self.center + d,
            ..*self
        }
    }

    /// Rotation is a multiple of a quarter turn (within 1e-12).
    pub fn is_axis_aligned(&self) -> bool {
        let q = self.angle / (0.5 * PI);
        (q - q.round()).abs() < 1e-12
    }

    fn axes(&self) -> [Vec2; 2] {
        let (s, c) = self.angle.sin_cos();
        [Vec2::new(c, s), Vec2::new(-s, c)]
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let (hu, hv) = (u * self.half_extents.a, v * self.half_extents.b);
        let c = self.center;
        [c + hu + hv, c - hu + hv, c - hu - hv, c + hu - hv]
    }

    pub fn aabb(&self) -> Aabb {
        if self.is_axis_aligned() {
            let quarter = (self.angle / (0.5 * PI)).round() as i32;
            let h = if quarter.rem_euclid(2) == 0 {
                self.half_extents
            } else {
                Vec2::new(self.half_extents.b, self.half_extents.a)
            };
            return Aabb {
                min: self.center - h,
                max: self.center + h,
            };
        }
        let cs = self.corners();
        let mut min = cs[0];
        let mut max = cs[0];
        for p in &cs[1..] {
            min = Vec2::new(min.a.min(p.a), min.b.min(p.b));
            max = Vec2::new(max.a.max(p.a), max.b.max(p.b));
        }
        Aabb { min, max }
    }

    /// Minimum penetration depth over the separating axes; values `<= 0`
    /// mean the rectangles are separated or touching.
    pub fn penetration(&self, other: &Rect) -> f64 {
        if self.is_axis_aligned() && other.is_axis_aligned() {
            let (x, y) = (self.aabb(), other.aabb());
            return x.overlap_on(&y, Axis::A).min(x.overlap_on(&y, Axis::B));
        }
        let mut depth = f64::INFINITY;
        let (pa, pb) = (self.corners(), other.corners());
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (amin, amax) = project(&pa, axis);
            let (bmin, bmax) = project(&pb, axis);
            depth = depth.min(amax.min(bmax) - amin.max(bmin));
        }
        depth
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.penetration(other) > CONTACT_EPS
    }

    /// Expresses the world point `p` in this rectangle's local frame.
    pub fn local_point(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.angle)
    }
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.dot(axis);
            (lo.min(d), hi.max(d))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_rotation_is_exact() {
        let v = Vec2::new(0.3, -0.1);
        assert_eq!(v.rotate_quarter(1), Vec2::new(0.1, 0.3));
        assert_eq!(v.rotate_quarter(4), v);
        assert_eq!(v.rotate_quarter(-1), v.rotate_quarter(3));
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn touching_rects_do_not_overlap() {
        let r1 = Rect::from_bounds(0.0, 0.0, 1.0, 1.0);
        let r2 = Rect::from_bounds(1.0, 0.0, 2.0, 1.0);
        assert!(!r1.overlaps(&r2));
        let r3 = r2.translated(Vec2::new(-0.01, 0.0));
        assert!((r1.penetration(&r3) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rotated_rect_sat() {
        let floor = Rect::from_bounds(0.0, -1.0, 1.0, 0.0);
        // A unit square rotated 45 degrees resting with its corner 0.05 above the floor.
        let h = 0.5;
        let r = Rect::rotated(
            Vec2::new(0.5, h * 2f64.sqrt() + 0.05),
            Vec2::new(h, h),
            PI / 4.0,
        );
        assert!(!r.overlaps(&floor));
        let r = r.translated(Vec2::new(0.0, -0.1));
        assert!((r.penetration(&floor) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn quarter_turned_rect_swaps_extents() {
        let r = Rect::rotated(Vec2::ZERO, Vec2::new(0.09, 0.01), PI / 2.0);
        let bb = r.aabb();
        assert!((bb.max.a - 0.01).abs() < 1e-15);
        assert!((bb.max.b - 0.09).abs() < 1e-15);
    }
}
