//! Planar geometry: vectors, oriented boxes and polylines.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Rotated +90 degrees (left normal).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Body footprint, `length` along the heading and `width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub length: f64,
    pub width: f64,
}

impl Extent {
    pub const fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }
}

/// Corners in counterclockwise order starting at front-left.
pub fn obb_corners(pose: Pose, extent: Extent) -> [Vec2; 4] {
    let c = pose.position();
    let f = Vec2::from_angle(pose.heading) * (extent.length / 2.0);
    let l = Vec2::from_angle(pose.heading).perp() * (extent.width / 2.0);
    [c + f + l, c - f + l, c - f - l, c + f - l]
}

fn project(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis overlap test for two oriented rectangles. Touching counts
/// as overlap.
pub fn obb_intersects(pose_a: Pose, extent_a: Extent, pose_b: Pose, extent_b: Extent) -> bool {
    let ca = obb_corners(pose_a, extent_a);
    let cb = obb_corners(pose_b, extent_b);
    let axes = [
        Vec2::from_angle(pose_a.heading),
        Vec2::from_angle(pose_a.heading).perp(),
        Vec2::from_angle(pose_b.heading),
        Vec2::from_angle(pose_b.heading).perp(),
    ];
    axes.iter().all(|&axis| {
        let (a_lo, a_hi) = project(&ca, axis);
        let (b_lo, b_hi) = project(&cb, axis);
        !(a_hi < b_lo || b_hi < a_lo)
    })
}

/// Distance from a point to a filled oriented rectangle (0 inside).
pub fn point_obb_distance(p: Vec2, pose: Pose, extent: Extent) -> f64 {
    let local = (p - pose.position()).rotate(-pose.heading);
    let dx = (local.x.abs() - extent.length / 2.0).max(0.0);
    let dy = (local.y.abs() - extent.width / 2.0).max(0.0);
    dx.hypot(dy)
}

/// Minimum Euclidean distance between two filled oriented rectangles; zero
/// exactly when [`obb_intersects`] holds.
///
/// For disjoint convex polygons the closest pair always involves a vertex of
/// one of them, so the minimum of the eight vertex-to-box distances suffices.
pub fn obb_distance(pose_a: Pose, extent_a: Extent, pose_b: Pose, extent_b: Extent) -> f64 {
    if obb_intersects(pose_a, extent_a, pose_b, extent_b) {
        return 0.0;
    }
    let from_a = obb_corners(pose_a, extent_a)
        .iter()
        .map(|&p| point_obb_distance(p, pose_b, extent_b))
        .fold(f64::INFINITY, f64::min);
    let from_b = obb_corners(pose_b, extent_b)
        .iter()
        .map(|&p| point_obb_distance(p, pose_a, extent_a))
        .fold(f64::INFINITY, f64::min);
    // Disjoint boxes with a vertex at distance 0 would be touching, which the
    // SAT test already reports as overlap; keep the result strictly positive.
    from_a.min(from_b).max(f64::MIN_POSITIVE)
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length from the polyline start to the foot point.
    pub arc: f64,
    /// Signed perpendicular offset, positive to the left of travel.
    pub lateral: f64,
    /// Unsigned distance to the foot point.
    pub distance: f64,
    /// Index of the segment holding the foot point.
    pub segment: usize,
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Cumulative arc length at each vertex.
pub fn cumulative_arcs(points: &[Vec2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    out
}

/// Project `p` onto segment `a -> b`. Returns (t in [0,1], foot, signed lateral).
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec2, f64) {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let foot = a + d * t;
    let side = d.cross(p - a);
    let dist = p.dist(foot);
    (t, foot, if side < 0.0 { -dist } else { dist })
}

/// Nearest point on the polyline, first minimum wins. `arcs` are the
/// cumulative arcs of `points`.
pub fn project_on_polyline(points: &[Vec2], arcs: &[f64], p: Vec2) -> Projection {
    project_on_polyline_range(points, arcs, p, 0, points.len().saturating_sub(1))
}

/// As [`project_on_polyline`], restricted to segments `first..last`.
pub fn project_on_polyline_range(points: &[Vec2], arcs: &[f64], p: Vec2, first: usize, last: usize) -> Projection {
    let mut best = Projection {
        arc: 0.0,
        lateral: p.dist(points[0]),
        distance: p.dist(points[0]),
        segment: 0,
    };
    let mut best_d = f64::INFINITY;
    for i in first..last.min(points.len() - 1) {
        let (t, _foot, lat) = project_on_segment(p, points[i], points[i + 1]);
        let d = lat.abs();
        if d < best_d {
            best_d = d;
            best = Projection {
                arc: arcs[i] + t * (arcs[i + 1] - arcs[i]),
                lateral: lat,
                distance: d,
                segment: i,
            };
        }
    }
    best
}

/// Point and unit tangent at arc position `s` (clamped to the polyline).
pub fn point_at_arc(points: &[Vec2], arcs: &[f64], s: f64) -> (Vec2, Vec2) {
    let n = points.len();
    let total = arcs[n - 1];
    let s = s.clamp(0.0, total);
    let i = match arcs.binary_search_by(|a| a.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    let seg = arcs[i + 1] - arcs[i];
    let t = if seg > 0.0 { (s - arcs[i]) / seg } else { 0.0 };
    let dir = (points[i + 1] - points[i]).normalized();
    (points[i] + (points[i + 1] - points[i]) * t, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAR: Extent = Extent::new(4.0, 2.0);

    #[test]
    fn identical_boxes_overlap() {
        let p = Pose::new(1.0, 2.0, 0.3);
        assert!(obb_intersects(p, CAR, p, CAR));
        assert_eq!(obb_distance(p, CAR, p, CAR), 0.0);
    }

    #[test]
    fn aligned_boxes_ten_apart() {
        let a = Pose::new(0.0, 0.0, 0.0);
        let b = Pose::new(10.0, 0.0, 0.0);
        assert!(!obb_intersects(a, CAR, b, CAR));
        assert!((obb_distance(a, CAR, b, CAR) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_corner_gap() {
        // Diamond corner pointing at the face of an axis-aligned square.
        let sq = Extent::new(2.0, 2.0);
        let a = Pose::new(0.0, 0.0, 0.0);
        let b = Pose::new(1.0 + 2f64.sqrt() + 0.5, 0.0, std::f64::consts::FRAC_PI_4);
        assert!((obb_distance(a, sq, b, sq) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn polyline_projection() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)];
        let arcs = cumulative_arcs(&pts);
        let pr = project_on_polyline(&pts, &arcs, Vec2::new(5.0, 3.0));
        assert!((pr.arc - 5.0).abs() < 1e-12);
        assert!((pr.lateral - 3.0).abs() < 1e-12);
        let pr = project_on_polyline(&pts, &arcs, Vec2::new(12.0, 4.0));
        assert!((pr.arc - 14.0).abs() < 1e-12);
        assert!((pr.lateral + 2.0).abs() < 1e-12);
        let (p, d) = point_at_arc(&pts, &arcs, 15.0);
        assert_eq!(p, Vec2::new(10.0, 5.0));
        assert_eq!(d, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }
}
