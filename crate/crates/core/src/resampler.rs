//! Sensor-grid resampling.
//!
//! Each point is projected to spherical coordinates
//! `r = √(x²+y²+z²)`, `φ = atan2(√(x²+y²), z)`, `θ = atan2(y, x)` and assigned
//! to a (layer, azimuth-bin) cell of the sensor. A cell holds one return: the
//! nearest. Points are selected, never moved.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, PointCloud};

/// Points closer than this to the sensor origin have no direction (m).
pub const MIN_RANGE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("sensor needs at least two layers")]
    TooFewLayers,
    #[error("layer elevations must be strictly increasing within [0, pi]")]
    BadElevations,
    #[error("azimuth bin width must lie in (0, 2pi], got {0}")]
    BadBinWidth(f64),
    #[error("max range must be positive, got {0}")]
    BadMaxRange(f64),
    #[error("point at the sensor origin has no direction")]
    OriginPoint,
}

/// Physical scan pattern of a rotating LiDAR.
///
/// Elevations are polar angles measured from +z, so a horizontal beam has
/// `φ = π/2` and beams pointing below the horizon have `φ > π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    layer_elevations: Vec<f64>,
    azimuth_bin_width: f64,
    max_range: f64,
}

impl SensorSpec {
    pub fn new(layer_elevations: Vec<f64>, azimuth_bin_width: f64, max_range: f64) -> Result<Self, SensorError> {
        if layer_elevations.len() < 2 {
            return Err(SensorError::TooFewLayers);
        }
        let in_range = layer_elevations.iter().all(|e| (0.0..=PI).contains(e));
        if !in_range || layer_elevations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SensorError::BadElevations);
        }
        if !(azimuth_bin_width > 0.0 && azimuth_bin_width <= 2.0 * PI) {
            return Err(SensorError::BadBinWidth(azimuth_bin_width));
        }
        if !(max_range > 0.0) {
            return Err(SensorError::BadMaxRange(max_range));
        }
        Ok(Self {
            layer_elevations,
            azimuth_bin_width,
            max_range,
        })
    }

    /// `layers` evenly spaced beams between two elevation angles (degrees
    /// above the horizon), e.g. `+2` down to `-24.8`.
    pub fn uniform(layers: usize, upper_deg: f64, lower_deg: f64, bin_width_deg: f64, max_range: f64) -> Result<Self, SensorError> {
        if layers < 2 {
            return Err(SensorError::TooFewLayers);
        }
        let (hi, lo) = ((90.0 - upper_deg).to_radians(), (90.0 - lower_deg).to_radians());
        let step = (lo - hi) / (layers - 1) as f64;
        let elevations = (0..layers).map(|i| hi + step * i as f64).collect();
        Self::new(elevations, bin_width_deg.to_radians(), max_range)
    }

    /// 64 beams spanning +2° to −24.8°, 0.18° azimuth bins, 120 m.
    pub fn velodyne64() -> Self {
        Self::uniform(64, 2.0, -24.8, 0.18, 120.0).expect("valid preset")
    }

    /// 40 beams spanning +15° to −25°, 0.2° azimuth bins, 200 m.
    pub fn lidar40() -> Self {
        Self::uniform(40, 15.0, -25.0, 0.2, 200.0).expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "velodyne64" | "vlp64" | "hdl64" => Some(Self::velodyne64()),
            "lidar40" | "40" => Some(Self::lidar40()),
            _ => None,
        }
    }

    pub fn layer_elevations(&self) -> &[f64] {
        &self.layer_elevations
    }

    pub fn azimuth_bin_width(&self) -> f64 {
        self.azimuth_bin_width
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn bins_per_revolution(&self) -> usize {
        ((2.0 * PI / self.azimuth_bin_width).round() as usize).max(1)
    }

    pub fn layers(&self) -> usize {
        self.layer_elevations.len()
    }

    /// Nearest layer for a polar angle, `None` outside the vertical field of
    /// view (more than half the local layer gap from the nearest beam).
    pub fn layer_of(&self, phi: f64) -> Option<usize> {
        let e = &self.layer_elevations;
        let above = e.partition_point(|&x| x < phi);
        let i = if above == 0 {
            0
        } else if above == e.len() {
            e.len() - 1
        } else if phi - e[above - 1] <= e[above] - phi {
            above - 1
        } else {
            above
        };
        let gap = if phi < e[i] {
            if i > 0 { e[i] - e[i - 1] } else { e[1] - e[0] }
        } else if i + 1 < e.len() {
            e[i + 1] - e[i]
        } else {
            e[i] - e[i - 1]
        };
        ((phi - e[i]).abs() <= 0.5 * gap).then_some(i)
    }

    pub fn azimuth_bin(&self, theta: f64) -> usize {
        let bins = self.bins_per_revolution();
        ((((theta + PI) / self.azimuth_bin_width).floor() as i64).rem_euclid(bins as i64)) as usize
    }

    /// Grid cell of a point, `None` when the sensor cannot see it.
    pub fn cell_of(&self, p: &Point) -> Option<(usize, usize)> {
        let s = cartesian_to_spherical(p).ok()?;
        if s.r > self.max_range {
            return None;
        }
        Some((self.layer_of(s.phi)?, self.azimuth_bin(s.theta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    /// Polar angle from +z, in `[0, π]`.
    pub phi: f64,
    /// Azimuth from +x toward +y, in `(-π, π]`.
    pub theta: f64,
    pub reflectivity: f64,
}

pub fn cartesian_to_spherical(p: &Point) -> Result<SphericalPoint, SensorError> {
    let rho = p.x.hypot(p.y);
    let r = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
    if r <= MIN_RANGE {
        return Err(SensorError::OriginPoint);
    }
    Ok(SphericalPoint {
        r,
        phi: rho.atan2(p.z),
        theta: p.y.atan2(p.x),
        reflectivity: p.reflectivity,
    })
}

pub fn spherical_to_cartesian(s: &SphericalPoint) -> Point {
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    Point::new(s.r * sp * ct, s.r * sp * st, s.r * cp, s.reflectivity)
}

/// How two returns competing for one cell are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionRule {
    /// Keep the smaller range; the lower index wins exact ties.
    #[default]
    NearestRange,
    /// Points with index below `original_len` (the scan before insertion)
    /// beat inserted points; otherwise as `NearestRange`.
    PreferOriginal { original_len: usize },
}

impl CollisionRule {
    fn wins(&self, challenger: (f64, usize), holder: (f64, usize)) -> bool {
        if let CollisionRule::PreferOriginal { original_len } = *self {
            let (c, h) = (challenger.1 < original_len, holder.1 < original_len);
            if c != h {
                return c;
            }
        }
        challenger.0 < holder.0
    }
}

/// Keeps at most one point per sensor cell, in original order.
pub fn resample_to_sensor(cloud: &PointCloud, spec: &SensorSpec) -> PointCloud {
    resample_with(cloud, spec, CollisionRule::default())
}

pub fn resample_with(cloud: &PointCloud, spec: &SensorSpec, rule: CollisionRule) -> PointCloud {
    let kept = resample_indices(cloud, spec, rule);
    PointCloud {
        points: kept.iter().map(|&i| cloud.points[i]).collect(),
        frame_id: cloud.frame_id.clone(),
    }
}

/// Indices of the surviving points, ascending.
pub fn resample_indices(cloud: &PointCloud, spec: &SensorSpec, rule: CollisionRule) -> Vec<usize> {
    let mut cells: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let Some(cell) = spec.cell_of(p) else { continue };
        let r = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
        cells
            .entry(cell)
            .and_modify(|holder| {
                if rule.wins((r, i), *holder) {
                    *holder = (r, i);
                }
            })
            .or_insert((r, i));
    }
    let mut kept: Vec<usize> = cells.into_values().map(|(_, i)| i).collect();
    kept.sort_unstable();
    kept
}
