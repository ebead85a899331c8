//! Exact 2D primitives shared by simulation, perception and risk.
//!
//! Everything here is generic over the scalar; the rest of the stack uses
//! the `f64` aliases exported from the crate root. Angle convention:
//! radians in `(-pi, pi]`, counter-clockwise positive.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Tolerance for exact geometric predicates.
pub const GEOM_EPS: f64 = 1e-9;

/// 2D vector (meters). Constructors reject non-finite components.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2<R> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Vec2<R> {
    #[inline]
    pub fn new(x: R, y: R) -> Self {
        assert!(x.is_finite() && y.is_finite(), "non-finite Vec2 component");
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self { x: R::zero(), y: R::zero() }
    }

    /// Unit vector at `angle` radians from +x.
    #[inline]
    pub fn from_angle(angle: R) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    #[inline]
    pub fn dot(self, other: Self) -> R {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> R {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> R {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> R {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Self) -> R {
        (other - self).norm()
    }

    /// Direction angle `atan2(y, x)`.
    #[inline]
    pub fn angle(self) -> R {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Self {
        Self { x: -self.y, y: self.x }
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn try_normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= R::cst(GEOM_EPS) {
            None
        } else {
            Some(Self { x: self.x / n, y: self.y / n })
        }
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: R) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl<R: Real> std::ops::Add for Vec2<R> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl<R: Real> std::ops::Sub for Vec2<R> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

impl<R: Real> std::ops::Mul<R> for Vec2<R> {
    type Output = Self;
    #[inline]
    fn mul(self, s: R) -> Self {
        Self { x: self.x * s, y: self.y * s }
    }
}

impl<R: Real> std::ops::Neg for Vec2<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y }
    }
}

/// Position plus heading; the heading is always wrapped into `(-pi, pi]`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose<R> {
    pub position: Vec2<R>,
    heading: R,
}

impl<R: Real> Pose<R> {
    pub fn new(position: Vec2<R>, heading: R) -> Self {
        Self { position, heading: wrap_angle(heading) }
    }

    #[inline]
    pub fn heading(&self) -> R {
        self.heading
    }
}

/// Line segment with distinct endpoints.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<R> {
    pub a: Vec2<R>,
    pub b: Vec2<R>,
}

impl<R: Real> Segment<R> {
    pub fn new(a: Vec2<R>, b: Vec2<R>) -> Self {
        assert!(a != b, "degenerate segment");
        Self { a, b }
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Vec2<R>) -> R {
        let e = self.b - self.a;
        let t = (p - self.a).dot(e) / e.norm_sq();
        let t = t.max(R::zero()).min(R::one());
        (self.a + e * t).distance(p)
    }
}

/// Wrap an angle into `(-pi, pi]`. Idempotent: values already in range are
/// returned unchanged, bit for bit.
pub fn wrap_angle<R: Real>(a: R) -> R {
    assert!(a.is_finite(), "non-finite angle");
    let pi = R::cst(std::f64::consts::PI);
    if a > -pi && a <= pi {
        return a;
    }
    let two_pi = pi + pi;
    let mut r = a % two_pi;
    if r < R::zero() {
        r = r + two_pi;
    }
    // r in [0, 2*pi)
    if r > pi {
        r - two_pi
    } else {
        r
    }
}

/// Cast a ray from `origin` along the unit vector `direction` and intersect
/// it with `seg`. Returns the smallest non-negative ray parameter, i.e. the
/// distance to the hit point, or `None` (parallel rays count as a miss).
pub fn ray_segment_intersect<R: Real>(
    origin: Vec2<R>,
    direction: Vec2<R>,
    seg: &Segment<R>,
) -> Option<R> {
    debug_assert!(
        (direction.norm() - R::one()).abs() <= R::cst(GEOM_EPS),
        "direction must be a unit vector"
    );
    let eps = R::cst(GEOM_EPS);
    let e = seg.b - seg.a;
    let denom = direction.cross(e);
    if denom.abs() <= eps {
        return None;
    }
    let ao = seg.a - origin;
    let t = ao.cross(e) / denom;
    let u = ao.cross(direction) / denom;
    if u < -eps || u > R::one() + eps || t < -eps {
        return None;
    }
    Some(t.max(R::zero()))
}

/// First intersection of a ray with a circle boundary, as a distance along
/// the ray. An origin inside the circle hits the boundary on the way out.
pub fn ray_circle_intersect<R: Real>(
    origin: Vec2<R>,
    direction: Vec2<R>,
    center: Vec2<R>,
    radius: R,
) -> Option<R> {
    let m = center - origin;
    let b = m.dot(direction);
    let disc = radius * radius - (m.norm_sq() - b * b);
    if disc < R::zero() {
        return None;
    }
    let root = disc.sqrt();
    let t_near = b - root;
    if t_near >= R::zero() {
        return Some(t_near);
    }
    let t_far = b + root;
    if t_far >= R::zero() {
        Some(t_far)
    } else {
        None
    }
}

/// Point where the circle of `radius` around `center` cuts the segment from
/// `center` to `target`. A target inside the circle is returned unchanged.
pub fn circle_segment_point<R: Real>(center: Vec2<R>, radius: R, target: Vec2<R>) -> Vec2<R> {
    assert!(radius > R::zero(), "radius must be positive");
    assert!(target != center, "target coincides with center");
    let d = target - center;
    let n = d.norm();
    if n > radius {
        center + d * (radius / n)
    } else {
        target
    }
}
