//! Gas-exhaust augmentation and robustness toolkit for LiDAR object detection.
//!
//! The pipeline stages are:
//!
//! * [`alpha_shape`] reconstructs a closed surface from a labeled exhaust cloud,
//!   on top of the [`delaunay`] tetrahedralization.
//! * [`gas_gen`] samples new exhaust clouds from those surfaces and transfers
//!   reflectivity from the source cloud.
//! * [`augment`] pastes exhaust clouds behind or above vehicles.
//! * [`resampler`] re-imposes the scan pattern of a physical sensor.
//! * [`loss`] computes oriented 3D IoU and the noise-robustness loss value.
//! * [`eval`] injects box noise and computes R40 average precision.
//! * [`io`], [`seed`] and [`flat`] provide file formats, the stream-seed
//!   contract and a flat-array surface for foreign bindings.

pub mod alpha_shape;
pub mod augment;
pub mod delaunay;
pub mod eval;
pub mod flat;
pub mod frame;
pub mod gas_gen;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod loss;
pub mod resampler;
pub mod rng;
pub mod seed;

pub use alpha_shape::{reconstruct, AlphaParam, ReconstructError, TriangleMesh};
pub use augment::{augment_frame, AugmentParams, AugmentedFrame};
pub use delaunay::{delaunay3d, TetraComplex};
pub use frame::{DetectionFrame, GroundTruth, Prediction};
pub use gas_gen::{GasCloud, GasCloudPool};
pub use geometry::{Box3D, Point, PointCloud};
pub use loss::{iou3d, noise_loss, total_loss, LossBreakdown};
pub use resampler::{resample_to_sensor, SensorSpec};
pub use rng::SeededRng;
