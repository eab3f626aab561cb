//! Detection frames: a scan with its labels and predictions.

use crate::geometry::{Box3D, PointCloud};

/// Class names treated as vehicles for augmentation and evaluation.
pub const VEHICLE_CLASSES: &[&str] = &[
    "Car",
    "Van",
    "Truck",
    "Bus",
    "Vehicle",
    "PassengerCar",
    "LargeVehicle",
];

/// Class written for gas-exhaust boxes.
pub const GAS_EXHAUST_CLASS: &str = "GasExhaust";

pub fn is_vehicle(class: &str) -> bool {
    VEHICLE_CLASSES.iter().any(|c| c.eq_ignore_ascii_case(class))
}

/// A labeled object.
///
/// `occlusion` and `truncation` keep whatever the label file held; range
/// checks happen where difficulty is assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub class: String,
    pub truncation: f64,
    pub occlusion: i32,
    /// Observation angle, carried through for label-file fidelity.
    pub alpha: f64,
    /// 2D image box `[left, top, right, bottom]`, carried through unused.
    pub bbox2d: [f64; 4],
    pub bbox: Box3D,
}

impl GroundTruth {
    /// A fully visible, untruncated object with zeroed image fields.
    pub fn simple(class: impl Into<String>, bbox: Box3D) -> Self {
        Self {
            class: class.into(),
            truncation: 0.0,
            occlusion: 0,
            alpha: 0.0,
            bbox2d: [0.0; 4],
            bbox,
        }
    }

    pub fn is_vehicle(&self) -> bool {
        is_vehicle(&self.class)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: String,
    pub bbox: Box3D,
    /// Confidence in `[0, 1]`.
    pub score: f64,
}

impl Prediction {
    pub fn new(class: impl Into<String>, bbox: Box3D, score: f64) -> Self {
        Self {
            class: class.into(),
            bbox,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionFrame {
    pub cloud: PointCloud,
    pub gt: Vec<GroundTruth>,
    pub predictions: Vec<Prediction>,
}

impl DetectionFrame {
    pub fn new(cloud: PointCloud, gt: Vec<GroundTruth>) -> Self {
        Self {
            cloud,
            gt,
            predictions: Vec::new(),
        }
    }

    pub fn vehicle_boxes(&self) -> impl Iterator<Item = &Box3D> {
        self.gt.iter().filter(|g| g.is_vehicle()).map(|g| &g.bbox)
    }
}
