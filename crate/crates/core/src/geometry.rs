//! Planar convex geometry: hulls, halfspace intersection, chords, support
//! and width functions of convex polygons.
//!
//! All predicates use a fixed absolute tolerance [`EPS`]. Coordinates live in a
//! bounded window of a few hundred world units, so plain `f64` is adequate.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for orientation tests and collinear merging.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `deg` degrees counterclockwise from the positive x axis.
    pub fn from_angle_deg(deg: f64) -> Self {
        let r = deg.to_radians();
        Self::new(r.cos(), r.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }

    /// Rotate counterclockwise by 90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Detector-axis unit vector for tilt angle `theta` (degrees).
///
/// A tilt of `theta` rotates the object clockwise; the detector coordinate of a
/// world point `p` is `p · detector_axis(theta)`. At `theta = 0` the detector
/// axis is `(1, 0)` and rays run along the vertical.
pub fn detector_axis(theta: f64) -> Vec2 {
    Vec2::from_angle_deg(theta)
}

/// Ray direction for tilt angle `theta`, orthogonal to [`detector_axis`].
pub fn ray_direction(theta: f64) -> Vec2 {
    detector_axis(theta).perp()
}

/// Convex polygon with counterclockwise, strictly convex vertex order. May be empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from vertices that are already in convex position. The vertices are
    /// re-hulled, so order and duplicated or collinear points do not matter.
    pub fn from_points(points: &[Vec2]) -> Self {
        convex_hull(points)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        convex_hull(&[
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    /// Regular polygon with `n` vertices on a circle of radius `r`, the first
    /// vertex at angle `phase_deg`.
    pub fn regular(n: usize, r: f64, center: Vec2, phase_deg: f64) -> Self {
        let pts: Vec<Vec2> = (0..n)
            .map(|i| center + Vec2::from_angle_deg(phase_deg + 360.0 * i as f64 / n as f64) * r)
            .collect();
        convex_hull(&pts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Edges as `(start, end)` pairs in counterclockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn centroid(&self) -> Option<Vec2> {
        let a = self.area();
        if a <= EPS {
            return None;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Some(Vec2::new(cx / (6.0 * a), cy / (6.0 * a)))
    }

    /// Point-in-polygon test, boundary included within `tol`.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        !self.is_empty()
            && self
                .edges()
                .all(|(a, b)| (b - a).cross(p - a) >= -tol * (b - a).norm())
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max(v[i].distance(v[j]));
            }
        }
        d
    }

    /// Clip against a single halfspace (Sutherland–Hodgman step).
    pub fn clip(&self, h: &Halfspace) -> Self {
        if self.is_empty() {
            return Self::empty();
        }
        let signed = |p: Vec2| h.normal.dot(p) - h.offset;
        let mut out = Vec::with_capacity(self.vertices.len() + 1);
        for (p, q) in self.edges() {
            let (sp, sq) = (signed(p), signed(q));
            let p_in = sp <= EPS;
            let q_in = sq <= EPS;
            if p_in {
                out.push(p);
            }
            if p_in != q_in && (sp - sq).abs() > 0.0 {
                let t = sp / (sp - sq);
                out.push(p + (q - p) * t);
            }
        }
        convex_hull(&out)
    }

    pub fn translated(&self, d: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v * s).collect(),
        }
    }
}

/// The closed halfspace `{x : normal · x <= offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec2,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes `normal` and rescales `offset` accordingly.
    pub fn new(normal: Vec2, offset: f64) -> Self {
        let n = normal.norm();
        Self {
            normal: normal * (1.0 / n),
            offset: offset / n,
        }
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.normal.dot(p) <= self.offset + tol
    }
}

/// Convex hull by Andrew's monotone chain. Fewer than three non-collinear
/// points give the empty polygon.
pub fn convex_hull(points: &[Vec2]) -> ConvexPolygon {
    let mut pts: Vec<Vec2> = points
        .iter()
        .copied()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .collect();
    if pts.len() < 3 {
        return ConvexPolygon::empty();
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);

    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= EPS {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= EPS {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return ConvexPolygon::empty();
    }
    let poly = ConvexPolygon { vertices: hull };
    if poly.area() <= EPS {
        return ConvexPolygon::empty();
    }
    poly
}

/// Intersection of halfspaces, clipped to the square `[-bound, bound]²`.
pub fn halfspace_intersection(hs: &[Halfspace], bound: f64) -> ConvexPolygon {
    let mut poly = ConvexPolygon::rectangle(-bound, -bound, bound, bound);
    for h in hs {
        poly = poly.clip(h);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// An infinite line `point + t · direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: Vec2,
    pub direction: Vec2,
}

impl Line {
    pub fn new(point: Vec2, direction: Vec2) -> Self {
        Self {
            point,
            direction: direction.normalized(),
        }
    }

    /// Measurement line for tilt `theta` at detector offset `s`.
    pub fn detector(theta: f64, s: f64) -> Self {
        Self::new(detector_axis(theta) * s, ray_direction(theta))
    }
}

/// Parameter interval of `line ∩ poly` (Cyrus–Beck), if non-empty.
pub fn clip_line(poly: &ConvexPolygon, line: &Line) -> Option<(f64, f64)> {
    if poly.is_empty() {
        return None;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in poly.edges() {
        let e = b - a;
        // inside: cross(e, p + t d - a) >= 0
        let c0 = e.cross(line.point - a);
        let c1 = e.cross(line.direction);
        if c1.abs() < 1e-15 {
            if c0 < 0.0 {
                return None;
            }
            continue;
        }
        let t = -c0 / c1;
        if c1 > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// Length of `line ∩ poly`; zero when disjoint.
pub fn chord_length(poly: &ConvexPolygon, line: &Line) -> f64 {
    clip_line(poly, line).map_or(0.0, |(lo, hi)| (hi - lo).max(0.0))
}

/// Support function `max_{x in poly} u · x`.
pub fn support(poly: &ConvexPolygon, u: Vec2) -> Result<f64> {
    if poly.is_empty() {
        return Err(Error::EmptyPolygon);
    }
    Ok(poly
        .vertices()
        .iter()
        .map(|v| u.dot(*v))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Width orthogonal to tilt `theta`: the shadow length along the detector axis.
pub fn width(poly: &ConvexPolygon, theta: f64) -> Result<f64> {
    let v = detector_axis(theta);
    Ok(support(poly, v)? + support(poly, -v)?)
}
