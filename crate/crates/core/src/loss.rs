//! Oriented 3D IoU and the noise-robustness loss.
//!
//! `noise_loss(P, B)` reduces the pairwise IoU between predictions `P` and
//! gas-exhaust boxes `B` to a scalar as the mean, over predictions, of each
//! prediction's largest IoU with any gas box. The combined objective is
//! `L = L_train + β · L_noise`.
//!
//! Only values are computed here; gradients belong to the training framework.

use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

/// Weight of the noise term used when none is given.
pub const DEFAULT_BETA: f64 = 0.1;

/// Slack for the inside test of polygon clipping (m).
const CLIP_EPS: f64 = 1e-12;

/// Area of the overlap of the two yaw-rotated footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let clip = b.footprint();
    let mut poly: Vec<[f64; 2]> = a.footprint().to_vec();
    for k in 0..4 {
        if poly.is_empty() {
            return 0.0;
        }
        poly = clip_half_plane(&poly, clip[k], clip[(k + 1) % 4]);
    }
    shoelace(&poly).max(0.0)
}

/// Keeps the part of a convex polygon left of the directed edge `p -> q`.
fn clip_half_plane(poly: &[[f64; 2]], p: [f64; 2], q: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |x: [f64; 2]| (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (sc, sn) = (side(cur), side(next));
        let (cin, nin) = (sc >= -CLIP_EPS, sn >= -CLIP_EPS);
        if cin {
            out.push(cur);
        }
        if cin != nin {
            let t = sc / (sc - sn);
            out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
        }
    }
    out
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    (a.top().min(b.top()) - a.bottom().max(b.bottom())).max(0.0)
}

/// Oriented 3D intersection over union, in `[0, 1]`.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b) * vertical_overlap(a, b);
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Footprint intersection over footprint union, ignoring height.
pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    let union = a.length() * a.width() + b.length() * b.width() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Row-major `|P| × |B|` grid of IoU values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoUMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl IoUMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn iou_matrix(preds: &[Box3D], gas: &[Box3D]) -> IoUMatrix {
    let values = preds
        .iter()
        .flat_map(|p| gas.iter().map(move |g| iou3d(p, g)))
        .collect();
    IoUMatrix {
        rows: preds.len(),
        cols: gas.len(),
        values,
    }
}

/// Mean over predictions of the best IoU against any gas box; zero when
/// either set is empty.
pub fn noise_loss(preds: &[Box3D], gas: &[Box3D]) -> f64 {
    if preds.is_empty() || gas.is_empty() {
        return 0.0;
    }
    let m = iou_matrix(preds, gas);
    let sum: f64 = (0..m.rows())
        .map(|i| m.row(i).iter().copied().fold(0.0, f64::max))
        .sum();
    sum / preds.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_train: f64,
    pub l_noise: f64,
    pub beta: f64,
    pub total: f64,
}

pub fn total_loss(l_train: f64, l_noise: f64, beta: f64) -> LossBreakdown {
    LossBreakdown {
        l_train,
        l_noise,
        beta,
        total: l_train + beta * l_noise,
    }
}
