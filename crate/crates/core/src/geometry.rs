//! Shared geometric types.
//!
//! Coordinates are in the sensor frame: x forward, y left, z up. All yaw
//! rotations are about +z. Boxes are closed sets: a point on a face is inside.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used by [`Box3D::contains`] to absorb rounding from rigid transforms.
///
/// Kept well below 1e-9 m so a point 1 nm outside a face is still rejected.
pub const CONTAINMENT_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box dimensions must be finite and positive, got {0:?}")]
    InvalidDims([f64; 3]),
    #[error("non-finite box pose")]
    NonFinitePose,
}

/// A single LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Unitless, in `[0, 1]`.
    pub reflectivity: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64, reflectivity: f64) -> Self {
        Self {
            x,
            y,
            z,
            reflectivity,
        }
    }

    pub fn at(xyz: [f64; 3], reflectivity: f64) -> Self {
        Self::new(xyz[0], xyz[1], xyz[2], reflectivity)
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.reflectivity.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        dist3(self.xyz(), other.xyz())
    }
}

/// An ordered set of points tagged with an opaque frame identifier.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            frame_id: String::new(),
        }
    }

    pub fn with_frame_id(mut self, frame_id: impl Into<String>) -> Self {
        self.frame_id = frame_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(Point::xyz).collect()
    }

    pub fn centroid(&self) -> Option<[f64; 3]> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            c[0] += p.x;
            c[1] += p.y;
            c[2] += p.z;
        }
        Some([c[0] / n, c[1] / n, c[2] / n])
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        aabb(self.points.iter().map(Point::xyz))
    }
}

/// Oriented 3D box with yaw-only rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    center: [f64; 3],
    /// `[length, width, height]`; length runs along the box's local x.
    dims: [f64; 3],
    yaw: f64,
}

impl Box3D {
    /// Builds a box, normalizing `yaw` into `(-pi, pi]`.
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Result<Self, GeometryError> {
        if dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(GeometryError::InvalidDims(dims));
        }
        if center.iter().any(|c| !c.is_finite()) || !yaw.is_finite() {
            return Err(GeometryError::NonFinitePose);
        }
        Ok(Self {
            center,
            dims,
            yaw: normalize_angle(yaw),
        })
    }

    /// Axis-aligned cube of the given edge length.
    pub fn cube(center: [f64; 3], edge: f64) -> Result<Self, GeometryError> {
        Self::new(center, [edge; 3], 0.0)
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn dims(&self) -> [f64; 3] {
        self.dims
    }

    pub fn length(&self) -> f64 {
        self.dims[0]
    }

    pub fn width(&self) -> f64 {
        self.dims[1]
    }

    pub fn height(&self) -> f64 {
        self.dims[2]
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn bottom(&self) -> f64 {
        self.center[2] - 0.5 * self.dims[2]
    }

    pub fn top(&self) -> f64 {
        self.center[2] + 0.5 * self.dims[2]
    }

    /// Same pose, dimensions scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        Self::new(self.center, self.dims.map(|d| d * factor), self.yaw)
    }

    /// Same pose, each dimension grown by `delta` (which may be negative).
    pub fn dilated(&self, delta: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(
            self.center,
            [
                self.dims[0] + delta[0],
                self.dims[1] + delta[1],
                self.dims[2] + delta[2],
            ],
            self.yaw,
        )
    }

    /// Footprint corners, counter-clockwise viewed from above, starting at
    /// local `(+l/2, +w/2)`.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (hl, hw) = (0.5 * self.dims[0], 0.5 * self.dims[1]);
        let (s, c) = self.yaw.sin_cos();
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[u, v]| [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v])
    }

    /// The 8 corners: the bottom face in [`footprint`](Self::footprint)
    /// order, then the top face in the same order.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let fp = self.footprint();
        let (zb, zt) = (self.bottom(), self.top());
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in fp.into_iter().enumerate() {
            out[i] = [x, y, zb];
            out[i + 4] = [x, y, zt];
        }
        out
    }

    /// Maps a world-frame position into box-local coordinates.
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.center[2]]
    }

    /// Inverse of [`to_local`](Self::to_local).
    pub fn to_world(&self, q: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [
            self.center[0] + c * q[0] - s * q[1],
            self.center[1] + s * q[0] + c * q[1],
            self.center[2] + q[2],
        ]
    }

    /// Closed containment test in the box frame.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let q = self.to_local(p);
        (0..3).all(|k| q[k].abs() <= 0.5 * self.dims[k] + CONTAINMENT_EPS)
    }
}

/// The 8 corners of `b`. See [`Box3D::corners`] for the ordering.
pub fn box_corners(b: &Box3D) -> [[f64; 3]; 8] {
    b.corners()
}

/// Point expressed in the box frame; reflectivity is carried through.
pub fn to_box_frame(p: &Point, b: &Box3D) -> Point {
    Point::at(b.to_local(p.xyz()), p.reflectivity)
}

pub fn from_box_frame(p: &Point, b: &Box3D) -> Point {
    Point::at(b.to_world(p.xyz()), p.reflectivity)
}

/// Indices of the points of `cloud` inside or on the boundary of `b`.
pub fn points_in_box(cloud: &PointCloud, b: &Box3D) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| b.contains(p.xyz()))
        .map(|(i, _)| i)
        .collect()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    if r <= -PI {
        r += two_pi;
    }
    r
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

pub(crate) fn aabb(points: impl IntoIterator<Item = [f64; 3]>) -> Option<([f64; 3], [f64; 3])> {
    let mut it = points.into_iter();
    let first = it.next()?;
    let (mut lo, mut hi) = (first, first);
    for p in it {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}
