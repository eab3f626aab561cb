//! Browser bindings for the static demo page in `www/`.
//!
//! Three operations are exposed: oriented box IoU, alpha-shape gas-cloud
//! generation, and a synthetic scene that is augmented and then resampled
//! to a sensor with an adjustable layer count. Each has a plain Rust
//! counterpart so it can be tested without a browser.

use wasm_bindgen::prelude::*;

use exhaustkit::alpha_shape::{reconstruct, AlphaParam};
use exhaustkit::augment::{augment_frame, AugmentParams};
use exhaustkit::flat::{boxes_from_flat, boxes_to_flat, points_to_flat};
use exhaustkit::gas_gen::{generate_cloud, random_noise_cloud_with, sample_surface, transfer_reflectivity, GasCloudPool};
use exhaustkit::loss::{bev_intersection_area, bev_iou, iou3d};
use exhaustkit::resampler::{resample_indices, CollisionRule};
use exhaustkit::{Box3D, DetectionFrame, GroundTruth, Point, PointCloud, SeededRng, SensorSpec};

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// `[iou3d, bev_iou, footprint intersection area]` for two `x y z l w h yaw` boxes.
pub fn iou_values(a: &[f64], b: &[f64]) -> Result<[f64; 3], String> {
    let boxes = boxes_from_flat("boxes", &[a, b].concat()).map_err(|e| e.to_string())?;
    if boxes.len() != 2 {
        return Err(format!("expected two boxes, got {}", boxes.len()));
    }
    let (a, b) = (&boxes[0], &boxes[1]);
    Ok([iou3d(a, b), bev_iou(a, b), bev_intersection_area(a, b)])
}

#[wasm_bindgen]
pub fn box_iou(a: &[f64], b: &[f64]) -> Result<Vec<f64>, JsError> {
    iou_values(a, b).map(|v| v.to_vec()).map_err(js)
}

/// Source blob the demo reconstructs from.
fn demo_source(seed: u64) -> PointCloud {
    let mut cloud = random_noise_cloud_with(0.25, 300, &mut SeededRng::new(seed)).cloud;
    for p in &mut cloud.points {
        p.x *= 2.0;
    }
    cloud
}

/// `n` points sampled from the alpha-shape surface of a seeded source blob,
/// as flat `x y z r` rows, plus the triangle count of the surface.
pub fn gas_points(seed: u64, alpha: f64, n: usize) -> Result<(Vec<f32>, usize), String> {
    let source = demo_source(seed);
    let mesh = reconstruct(&source, AlphaParam::new(alpha).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let samples = sample_surface(&mesh, n, &mut rng).map_err(|e| e.to_string())?;
    let cloud = transfer_reflectivity(&samples, &source).map_err(|e| e.to_string())?;
    Ok((points_to_flat(&cloud), mesh.triangles().len()))
}

#[wasm_bindgen]
pub fn gas_cloud(seed: u32, alpha: f64, n: u32) -> Result<Vec<f32>, JsError> {
    gas_points(u64::from(seed), alpha, n as usize).map(|(p, _)| p).map_err(js)
}

/// An augmented scene before and after sensor resampling.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    raw: Vec<f32>,
    original_len: usize,
    resampled: Vec<f32>,
    resampled_gas: Vec<u8>,
    vehicles: Vec<f64>,
    gas_boxes: Vec<f64>,
}

#[wasm_bindgen]
impl Scene {
    /// Augmented points, `x y z r` rows; rows from `original_len` on are gas.
    #[wasm_bindgen(getter)]
    pub fn raw(&self) -> Vec<f32> {
        self.raw.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn original_len(&self) -> usize {
        self.original_len
    }

    #[wasm_bindgen(getter)]
    pub fn resampled(&self) -> Vec<f32> {
        self.resampled.clone()
    }

    /// One flag per resampled row: 1 when the row came from a gas cloud.
    #[wasm_bindgen(getter)]
    pub fn resampled_gas(&self) -> Vec<u8> {
        self.resampled_gas.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn vehicles(&self) -> Vec<f64> {
        self.vehicles.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn gas_boxes(&self) -> Vec<f64> {
        self.gas_boxes.clone()
    }
}

fn box_surface(b: &Box3D, n: usize, rng: &mut SeededRng) -> Vec<Point> {
    let [l, w, h] = b.dims();
    (0..n)
        .map(|_| {
            let mut local = [l * (rng.unit() - 0.5), w * (rng.unit() - 0.5), h * (rng.unit() - 0.5)];
            let face = (rng.unit() * 3.0) as usize % 3;
            local[face] = if rng.chance(0.5) { 0.5 } else { -0.5 } * b.dims()[face];
            Point::at(b.to_world(local), 0.2 + 0.6 * rng.unit())
        })
        .collect()
}

/// Builds a street scene with three vehicles, pastes gas clouds next to
/// them and resamples the result to a `layers`-beam sensor.
pub fn build_scene(seed: u64, layers: usize, p_top: f64) -> Result<Scene, String> {
    let mut rng = SeededRng::new(seed);
    let vehicles: Vec<Box3D> = [(9.0, -3.0), (16.0, 4.0), (-12.0, 2.5)]
        .iter()
        .map(|&(x, y)| Box3D::new([x, y, -0.95], [4.2, 1.8, 1.5], std::f64::consts::TAU * rng.unit() - std::f64::consts::PI).expect("valid demo box"))
        .collect();
    let mut points: Vec<Point> = (0..6000)
        .map(|_| {
            let (r, t) = (3.0 + 37.0 * rng.unit().sqrt(), std::f64::consts::TAU * rng.unit());
            Point::new(r * t.cos(), r * t.sin(), -1.7, 0.1 * rng.unit())
        })
        .collect();
    for v in &vehicles {
        points.extend(box_surface(v, 700, &mut rng));
    }
    let frame = DetectionFrame::new(
        PointCloud::new(points),
        vehicles.iter().map(|v| GroundTruth::simple("Car", *v)).collect(),
    );

    let mut pool = GasCloudPool::new();
    for k in 0..3 {
        let gas = generate_cloud(&demo_source(seed + k), "demo", &mut SeededRng::new(seed + 100 + k)).map_err(|e| e.to_string())?;
        pool.push_generated(gas);
    }
    let params = AugmentParams {
        p_aug: 1.0,
        p_gas: 1.0,
        p_top,
        ..AugmentParams::default()
    };
    let aug = augment_frame(&frame, &pool, &params, &mut rng).map_err(|e| e.to_string())?;
    let spec = SensorSpec::uniform(layers, 2.0, -24.8, 0.18, 120.0).map_err(|e| e.to_string())?;
    let original_len = aug.original_len();
    let kept = resample_indices(&aug.frame.cloud, &spec, CollisionRule::NearestRange);
    let resampled = PointCloud::new(kept.iter().map(|&i| aug.frame.cloud.points[i]).collect());
    Ok(Scene {
        raw: points_to_flat(&aug.frame.cloud),
        original_len,
        resampled: points_to_flat(&resampled),
        resampled_gas: kept.iter().map(|&i| u8::from(i >= original_len)).collect(),
        vehicles: boxes_to_flat(&vehicles),
        gas_boxes: boxes_to_flat(&aug.gas_boxes),
    })
}

#[wasm_bindgen]
pub fn augment_scene(seed: u32, layers: u32, p_top: f64) -> Result<Scene, JsError> {
    build_scene(u64::from(seed), layers as usize, p_top).map_err(js)
}
