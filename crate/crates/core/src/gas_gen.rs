//! Synthetic gas-exhaust clouds.
//!
//! A labeled source cloud is reconstructed as an α-shape at a random
//! resolution, `N` points are drawn uniformly over the surface, and each
//! sample takes the reflectivity of its nearest source point. Results are
//! stored centered on their centroid in a yaw-0 canonical frame; placement
//! applies the pose later.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alpha_shape::{reconstruct, AlphaParam, ReconstructError, TriangleMesh, MIN_CLOUD_POINTS};
use crate::geometry::{aabb, Box3D, Point, PointCloud};
use crate::kdtree::KdTree;
use crate::rng::SeededRng;

pub const MIN_SAMPLES: usize = 100;
pub const MAX_SAMPLES: usize = 1000;
/// Upper bound of the noise-baseline standard deviation (m).
pub const MAX_NOISE_SIGMA: f64 = 0.2;
/// Doublings of α tried after an empty reconstruction.
pub const ALPHA_RETRIES: usize = 5;
/// Floor applied to tight-box extents so flat clouds still get a valid box.
const MIN_BOX_EXTENT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("sample count {0} outside [100, 1000]")]
    NOutOfRange(usize),
    #[error("mesh has no area to sample")]
    EmptyMesh,
    #[error("source cloud is empty")]
    EmptySource,
    #[error("source cloud has {got} points, pool entries need at least {required}")]
    SourceTooSmall { required: usize, got: usize },
    #[error("reconstruction failed: {0}")]
    Reconstruct(#[from] ReconstructError),
    #[error("no non-empty reconstruction after {retries} alpha doublings (last alpha {last_alpha})")]
    GenerationFailed { retries: usize, last_alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Surface { source_id: String, alpha: f64, n: usize },
    RandomNoise { sigma: f64, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasCloud {
    pub cloud: PointCloud,
    /// Minimal axis-aligned box around the points, in the canonical frame.
    pub tight_box: Box3D,
    pub provenance: Provenance,
}

impl GasCloud {
    /// Recenters `cloud` on its centroid and derives the tight box.
    pub fn from_points(mut cloud: PointCloud, provenance: Provenance) -> Result<Self, GenError> {
        let c = cloud.centroid().ok_or(GenError::EmptySource)?;
        for p in &mut cloud.points {
            p.x -= c[0];
            p.y -= c[1];
            p.z -= c[2];
        }
        let tight_box = tight_box(&cloud).ok_or(GenError::EmptySource)?;
        Ok(Self {
            cloud,
            tight_box,
            provenance,
        })
    }

    /// Wraps points that are already in the canonical frame (e.g. read back
    /// from disk), recomputing only the tight box.
    pub fn from_canonical(cloud: PointCloud, provenance: Provenance) -> Result<Self, GenError> {
        let tight_box = tight_box(&cloud).ok_or(GenError::EmptySource)?;
        Ok(Self {
            cloud,
            tight_box,
            provenance,
        })
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.tight_box.height()
    }
}

/// Minimal yaw-0 box around the points.
pub fn tight_box(cloud: &PointCloud) -> Option<Box3D> {
    let (lo, hi) = cloud.bounds()?;
    let center = std::array::from_fn(|k| 0.5 * (lo[k] + hi[k]));
    let dims = std::array::from_fn(|k| (hi[k] - lo[k]).max(MIN_BOX_EXTENT));
    Box3D::new(center, dims, 0.0).ok()
}

/// Labeled source clouds plus the clouds generated from them.
#[derive(Debug, Clone, Default)]
pub struct GasCloudPool {
    sources: Vec<PointCloud>,
    generated: Vec<GasCloud>,
}

impl GasCloudPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a labeled source, rejecting clouds below the pool minimum.
    pub fn add_source(&mut self, cloud: PointCloud) -> Result<(), GenError> {
        if cloud.len() < MIN_CLOUD_POINTS {
            return Err(GenError::SourceTooSmall {
                required: MIN_CLOUD_POINTS,
                got: cloud.len(),
            });
        }
        self.sources.push(cloud);
        Ok(())
    }

    pub fn push_generated(&mut self, gas: GasCloud) {
        self.generated.push(gas);
    }

    pub fn sources(&self) -> &[PointCloud] {
        &self.sources
    }

    pub fn generated(&self) -> &[GasCloud] {
        &self.generated
    }

    pub fn is_empty(&self) -> bool {
        self.generated.is_empty()
    }

    /// Uniform draw over the generated clouds.
    pub fn draw(&self, rng: &mut SeededRng) -> Option<&GasCloud> {
        if self.generated.is_empty() {
            return None;
        }
        Some(&self.generated[rng.random_range(0..self.generated.len())])
    }
}

/// `n` points distributed uniformly over the mesh surface.
///
/// A triangle is picked with probability proportional to its area, then a
/// point inside it from folded barycentric coordinates.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, rng: &mut SeededRng) -> Result<Vec<[f64; 3]>, GenError> {
    if !(MIN_SAMPLES..=MAX_SAMPLES).contains(&n) {
        return Err(GenError::NOutOfRange(n));
    }
    if mesh.is_empty() || mesh.total_area() <= 0.0 {
        return Err(GenError::EmptyMesh);
    }
    let cumulative: Vec<f64> = mesh
        .areas()
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.unit() * total;
        let t = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
        out.push(sample_triangle(mesh.triangle(t), rng));
    }
    Ok(out)
}

fn sample_triangle([a, b, c]: [[f64; 3]; 3], rng: &mut SeededRng) -> [f64; 3] {
    let (mut u, mut v) = (rng.unit(), rng.unit());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    std::array::from_fn(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]))
}

/// Gives each sample the reflectivity of its nearest source point (lowest
/// source index on ties).
pub fn transfer_reflectivity(samples: &[[f64; 3]], source: &PointCloud) -> Result<PointCloud, GenError> {
    if source.is_empty() {
        return Err(GenError::EmptySource);
    }
    let tree = KdTree::new(&source.positions());
    let points = samples
        .iter()
        .map(|&s| {
            let (i, _) = tree.nearest(s).expect("non-empty tree");
            Point::at(s, source.points[i].reflectivity)
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// One synthetic cloud from `source`.
///
/// Draws `α ~ U(0, 1]` and `N ~ U{100..1000}`. An empty reconstruction is
/// retried with `α ← min(1, 2α)` up to [`ALPHA_RETRIES`] times.
pub fn generate_cloud(source: &PointCloud, source_id: &str, rng: &mut SeededRng) -> Result<GasCloud, GenError> {
    if source.len() < MIN_CLOUD_POINTS {
        return Err(GenError::SourceTooSmall {
            required: MIN_CLOUD_POINTS,
            got: source.len(),
        });
    }
    let mut alpha = 1.0 - rng.unit();
    let n = rng.random_range(MIN_SAMPLES..=MAX_SAMPLES);

    let mut attempt = 0;
    let mesh = loop {
        match reconstruct(source, AlphaParam::new(alpha)?) {
            Ok(mesh) => break mesh,
            Err(ReconstructError::EmptyAlphaComplex { .. }) if attempt < ALPHA_RETRIES => {
                attempt += 1;
                alpha = (2.0 * alpha).min(1.0);
            }
            Err(ReconstructError::EmptyAlphaComplex { .. }) => {
                return Err(GenError::GenerationFailed {
                    retries: ALPHA_RETRIES,
                    last_alpha: alpha,
                })
            }
            Err(e) => return Err(e.into()),
        }
    };

    let samples = sample_surface(&mesh, n, rng)?;
    let cloud = transfer_reflectivity(&samples, source)?.with_frame_id(source_id);
    GasCloud::from_points(
        cloud,
        Provenance::Surface {
            source_id: source_id.to_string(),
            alpha,
            n,
        },
    )
}

/// Baseline cloud of isotropic Gaussian noise with `σ ~ U(0, 0.2]` and
/// `k ~ U{100..1000}` points.
pub fn generate_random_noise_cloud(rng: &mut SeededRng) -> GasCloud {
    let sigma = MAX_NOISE_SIGMA * (1.0 - rng.unit());
    let k = rng.random_range(MIN_SAMPLES..=MAX_SAMPLES);
    random_noise_cloud_with(sigma, k, rng)
}

/// Gaussian noise cloud with fixed parameters. Reflectivity is `U[0, 1]`.
pub fn random_noise_cloud_with(sigma: f64, k: usize, rng: &mut SeededRng) -> GasCloud {
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let points = (0..k)
        .map(|_| {
            let x = normal.sample(rng);
            let y = normal.sample(rng);
            let z = normal.sample(rng);
            Point::new(x, y, z, rng.unit())
        })
        .collect();
    GasCloud::from_points(PointCloud::new(points), Provenance::RandomNoise { sigma, k })
        .expect("k >= 1 points")
}

/// Bounds of a set of positions, exposed for tests and tools.
pub fn extent(points: &[[f64; 3]]) -> Option<([f64; 3], [f64; 3])> {
    aabb(points.iter().copied())
}
