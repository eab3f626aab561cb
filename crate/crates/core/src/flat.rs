//! Flat-buffer entry points for foreign callers.
//!
//! Points are `N×4` row-major `f32` (`x y z r`); boxes are `M×7` row-major
//! `f64` (`x y z l w h yaw`, centre in the sensor frame). Inputs are only
//! read.

use std::path::Path;

use thiserror::Error;

use crate::augment::{augment_frame, AugmentError, AugmentParams};
use crate::frame::{DetectionFrame, GroundTruth};
use crate::gas_gen::GasCloudPool;
use crate::geometry::{Box3D, GeometryError, Point, PointCloud};
use crate::io::{read_pool, IoError};
use crate::loss::{iou_matrix, noise_loss};
use crate::resampler::{resample_to_sensor, SensorSpec};
use crate::rng::SeededRng;

pub const POINT_STRIDE: usize = 4;
pub const BOX_STRIDE: usize = 7;

#[derive(Debug, Error)]
pub enum FlatError {
    #[error("{what}: length {len} is not a multiple of {stride}")]
    Shape { what: &'static str, len: usize, stride: usize },
    #[error("box {index}: {source}")]
    InvalidBox {
        index: usize,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

fn check_shape(what: &'static str, len: usize, stride: usize) -> Result<(), FlatError> {
    if len % stride == 0 {
        Ok(())
    } else {
        Err(FlatError::Shape { what, len, stride })
    }
}

pub fn boxes_from_flat(what: &'static str, data: &[f64]) -> Result<Vec<Box3D>, FlatError> {
    check_shape(what, data.len(), BOX_STRIDE)?;
    data.chunks_exact(BOX_STRIDE)
        .enumerate()
        .map(|(index, r)| Box3D::new([r[0], r[1], r[2]], [r[3], r[4], r[5]], r[6]).map_err(|source| FlatError::InvalidBox { index, source }))
        .collect()
}

pub fn boxes_to_flat(boxes: &[Box3D]) -> Vec<f64> {
    boxes
        .iter()
        .flat_map(|b| {
            let (c, d) = (b.center(), b.dims());
            [c[0], c[1], c[2], d[0], d[1], d[2], b.yaw()]
        })
        .collect()
}

pub fn points_from_flat(data: &[f32]) -> Result<PointCloud, FlatError> {
    check_shape("points", data.len(), POINT_STRIDE)?;
    Ok(PointCloud::new(
        data.chunks_exact(POINT_STRIDE)
            .map(|r| Point::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64))
            .collect(),
    ))
}

pub fn points_to_flat(cloud: &PointCloud) -> Vec<f32> {
    cloud
        .points
        .iter()
        .flat_map(|p| [p.x as f32, p.y as f32, p.z as f32, p.reflectivity as f32])
        .collect()
}

/// A loaded gas-cloud pool, opened once and reused across calls.
#[derive(Debug, Clone)]
pub struct PoolHandle {
    pool: GasCloudPool,
}

impl PoolHandle {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, FlatError> {
        Ok(Self {
            pool: read_pool(dir.as_ref())?.0,
        })
    }

    pub fn from_pool(pool: GasCloudPool) -> Self {
        Self { pool }
    }

    pub fn pool(&self) -> &GasCloudPool {
        &self.pool
    }

    /// Number of generated clouds available for insertion.
    pub fn len(&self) -> usize {
        self.pool.generated().len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatAugmentOutput {
    pub points: Vec<f32>,
    pub gas_boxes: Vec<f64>,
}

/// Augments one frame given its vehicle boxes and, when `sensor` is set,
/// resamples the result to that sensor grid.
pub fn augment_flat(
    handle: &PoolHandle,
    points: &[f32],
    vehicle_boxes: &[f64],
    params: &AugmentParams,
    sensor: Option<&SensorSpec>,
    seed: u64,
) -> Result<FlatAugmentOutput, FlatError> {
    let cloud = points_from_flat(points)?;
    let gt = boxes_from_flat("vehicle_boxes", vehicle_boxes)?
        .into_iter()
        .map(|b| GroundTruth::simple("Car", b))
        .collect();
    let frame = DetectionFrame::new(cloud, gt);
    let aug = augment_frame(&frame, &handle.pool, params, &mut SeededRng::new(seed))?;
    let cloud = match sensor {
        Some(spec) => resample_to_sensor(&aug.frame.cloud, spec),
        None => aug.frame.cloud,
    };
    Ok(FlatAugmentOutput {
        points: points_to_flat(&cloud),
        gas_boxes: boxes_to_flat(&aug.gas_boxes),
    })
}

/// Row-major `|P|×|B|` IoU values.
pub fn iou_matrix_flat(preds: &[f64], gas: &[f64]) -> Result<Vec<f64>, FlatError> {
    let p = boxes_from_flat("preds", preds)?;
    let g = boxes_from_flat("gas", gas)?;
    Ok(iou_matrix(&p, &g).values().to_vec())
}

pub fn noise_loss_flat(preds: &[f64], gas: &[f64]) -> Result<f64, FlatError> {
    Ok(noise_loss(&boxes_from_flat("preds", preds)?, &boxes_from_flat("gas", gas)?))
}
