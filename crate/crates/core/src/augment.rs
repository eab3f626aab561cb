//! Copy-paste augmentation of gas-exhaust clouds next to vehicles.
//!
//! Per vehicle: with probability `p_top` a cloud sits on the roof; otherwise,
//! with probability `p_gas`, it sits off the rear face at the center, left or
//! right corner (uniformly). The whole frame is augmented with probability
//! `p_aug`, which a training schedule ramps from 0 to 1.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::frame::DetectionFrame;
use crate::gas_gen::{GasCloud, GasCloudPool};
use crate::geometry::{Box3D, Point};
use crate::rng::SeededRng;

pub const DEFAULT_P_GAS: f64 = 0.5;
pub const DEFAULT_P_TOP: f64 = 0.1;
/// Gap between the rear face and a rear anchor (m).
pub const DEFAULT_STANDOFF: f64 = 0.3;
/// Half-width of the uniform jitter applied to rear anchors in x and y (m).
pub const DEFAULT_JITTER: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("gas cloud pool has no generated clouds")]
    EmptyPool,
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("total epochs must be at least 1")]
    ZeroEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub p_gas: f64,
    pub p_top: f64,
    pub p_aug: f64,
    pub standoff: f64,
    pub jitter: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            p_gas: DEFAULT_P_GAS,
            p_top: DEFAULT_P_TOP,
            p_aug: 0.0,
            standoff: DEFAULT_STANDOFF,
            jitter: DEFAULT_JITTER,
        }
    }
}

impl AugmentParams {
    /// Default placement probabilities with `p_aug` from the epoch schedule.
    pub fn scheduled(epoch: u32, total_epochs: u32) -> Result<Self, AugmentError> {
        Ok(Self {
            p_aug: schedule_p_aug(epoch, total_epochs)?,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, value) in [("p_gas", self.p_gas), ("p_top", self.p_top), ("p_aug", self.p_aug)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AugmentError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }
}

/// `min(epoch / T, 1)`: zero at the first epoch, one after `T` epochs.
pub fn schedule_p_aug(epoch: u32, total_epochs: u32) -> Result<f64, AugmentError> {
    if total_epochs == 0 {
        return Err(AugmentError::ZeroEpochs);
    }
    Ok((f64::from(epoch) / f64::from(total_epochs)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Anchor {
    Top,
    BackCenter,
    BackLeft,
    BackRight,
}

/// Where a cloud goes relative to one vehicle.
///
/// `offset` is in the vehicle frame (x forward, y left). The height is
/// resolved at insertion, once the cloud's extent is known: rear clouds rest
/// on the vehicle's bottom plane, roof clouds on its top plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub anchor: Anchor,
    pub vehicle: Box3D,
    pub offset: [f64; 2],
}

impl Placement {
    pub fn yaw(&self) -> f64 {
        self.vehicle.yaw()
    }

    /// World position of the gas box center for a cloud of the given half-height.
    pub fn resolve(&self, half_height: f64) -> [f64; 3] {
        let base = match self.anchor {
            Anchor::Top => self.vehicle.top(),
            _ => self.vehicle.bottom(),
        };
        let [x, y, _] = self.vehicle.to_world([self.offset[0], self.offset[1], 0.0]);
        [x, y, base + half_height]
    }
}

/// Draws a placement for one vehicle, or `None` when no gas is added.
///
/// Draw order: roof trial, rear trial, rear anchor, then x and y jitter.
pub fn choose_placement(vehicle: &Box3D, rng: &mut SeededRng, params: &AugmentParams) -> Option<Placement> {
    if rng.chance(params.p_top) {
        return Some(Placement {
            anchor: Anchor::Top,
            vehicle: *vehicle,
            offset: [0.0, 0.0],
        });
    }
    if !rng.chance(params.p_gas) {
        return None;
    }
    let (hl, hw) = (0.5 * vehicle.length(), 0.5 * vehicle.width());
    let (anchor, y) = match rng.random_range(0..3) {
        0 => (Anchor::BackCenter, 0.0),
        1 => (Anchor::BackLeft, hw),
        _ => (Anchor::BackRight, -hw),
    };
    let jx = params.jitter * (2.0 * rng.unit() - 1.0);
    let jy = params.jitter * (2.0 * rng.unit() - 1.0);
    Some(Placement {
        anchor,
        vehicle: *vehicle,
        offset: [-hl - params.standoff + jx, y + jy],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedFrame {
    pub frame: DetectionFrame,
    /// The gas-exhaust box set, one box per inserted cloud.
    pub gas_boxes: Vec<Box3D>,
    /// Point-index range of each inserted cloud, parallel to `gas_boxes`.
    pub gas_ranges: Vec<Range<usize>>,
}

impl AugmentedFrame {
    pub fn unchanged(frame: DetectionFrame) -> Self {
        Self {
            frame,
            gas_boxes: Vec::new(),
            gas_ranges: Vec::new(),
        }
    }

    /// All inserted point indices, ascending.
    pub fn gas_point_indices(&self) -> Vec<usize> {
        self.gas_ranges.iter().flat_map(|r| r.clone()).collect()
    }

    /// Number of points in the frame before any insertion.
    pub fn original_len(&self) -> usize {
        self.gas_ranges
            .first()
            .map_or(self.frame.cloud.len(), |r| r.start)
    }
}

/// Rigidly moves `gas` to `placement` and appends it to the frame.
pub fn insert_cloud(aug: &mut AugmentedFrame, gas: &GasCloud, placement: &Placement) -> Box3D {
    let center = placement.resolve(gas.half_height());
    let gas_box = Box3D::new(center, gas.tight_box.dims(), placement.yaw())
        .expect("tight box dims are positive");
    let offset = gas.tight_box.center();
    let start = aug.frame.cloud.len();
    aug.frame.cloud.points.extend(gas.cloud.points.iter().map(|p| {
        let local = [p.x - offset[0], p.y - offset[1], p.z - offset[2]];
        Point::at(gas_box.to_world(local), p.reflectivity)
    }));
    aug.gas_boxes.push(gas_box);
    aug.gas_ranges.push(start..aug.frame.cloud.len());
    gas_box
}

/// Augments one frame. The result is not yet sensor-resampled.
pub fn augment_frame(
    frame: &DetectionFrame,
    pool: &GasCloudPool,
    params: &AugmentParams,
    rng: &mut SeededRng,
) -> Result<AugmentedFrame, AugmentError> {
    params.validate()?;
    if pool.is_empty() {
        return Err(AugmentError::EmptyPool);
    }
    let mut aug = AugmentedFrame::unchanged(frame.clone());
    if !rng.chance(params.p_aug) {
        return Ok(aug);
    }
    for vehicle in frame.vehicle_boxes() {
        if let Some(placement) = choose_placement(vehicle, rng, params) {
            let gas = pool.draw(rng).ok_or(AugmentError::EmptyPool)?;
            insert_cloud(&mut aug, gas, &placement);
        }
    }
    Ok(aug)
}
