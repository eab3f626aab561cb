//! α-shape surface reconstruction.
//!
//! The unitless resolution `α ∈ (0, 1]` is turned into a length by scaling
//! with the diagonal of the input's axis-aligned bounding box, so `α = 1` is
//! (for well-spread input) the convex hull and smaller values carve in.
//!
//! A Delaunay cell is *interior* when its circumradius is at most the
//! effective α (see [`effective_alpha`]). The surface is every triangle bounding the interior region,
//! plus every *singular* triangle: one that bounds no interior cell but has a
//! circumradius within α and an empty diametral ball. The singular faces are
//! what survive for shell-like inputs (points on a sphere, thin plumes) where
//! every cell spans the whole shell.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::delaunay::{delaunay3d, DelaunayError, TetraComplex};
use crate::geometry::{aabb, cross3, dist3, dot3, norm3, sub3, PointCloud};

/// Smallest number of points accepted for a source exhaust cloud.
pub const MIN_CLOUD_POINTS: usize = 30;
/// Triangles at or below this area (m²) are dropped from the mesh.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("no simplex of the complex qualifies at alpha = {alpha}")]
    EmptyAlphaComplex { alpha: f64 },
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("scale must be positive, got {0}")]
    InvalidScale(f64),
}

impl From<DelaunayError> for ReconstructError {
    fn from(e: DelaunayError) -> Self {
        match e {
            DelaunayError::TooFewPoints { required, got } => Self::TooFewPoints { required, got },
            DelaunayError::DegenerateGeometry(m) => Self::DegenerateGeometry(m),
        }
    }
}

/// Resolution of the reconstruction, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AlphaParam(f64);

impl AlphaParam {
    pub fn new(alpha: f64) -> Result<Self, ReconstructError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(ReconstructError::InvalidAlpha(alpha))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
}

impl TriangleMesh {
    /// Builds a mesh, dropping triangles with area at or below
    /// [`MIN_TRIANGLE_AREA`] and vertices no triangle references.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Self {
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| triangle_area(t.map(|v| vertices[v])) > MIN_TRIANGLE_AREA)
            .collect();
        let mut remap: BTreeMap<usize, usize> = triangles.iter().flatten().map(|&v| (v, 0)).collect();
        for (new, old) in remap.values_mut().zip(0..) {
            *new = old;
        }
        let vertices_out = remap.keys().map(|&v| vertices[v]).collect();
        let triangles: Vec<[usize; 3]> = triangles.iter().map(|t| t.map(|v| remap[&v])).collect();
        let mut mesh = Self {
            vertices: vertices_out,
            triangles,
            areas: Vec::new(),
        };
        mesh.areas = mesh
            .triangles
            .iter()
            .map(|t| triangle_area(t.map(|v| mesh.vertices[v])))
            .collect();
        mesh
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [[f64; 3]; 3] {
        self.triangles[i].map(|v| self.vertices[v])
    }
}

pub fn triangle_area([a, b, c]: [[f64; 3]; 3]) -> f64 {
    0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
}

/// Circumcenter and circumradius of a triangle in 3D.
fn triangle_circumcircle([a, b, c]: [[f64; 3]; 3]) -> Option<([f64; 3], f64)> {
    let (u, v) = (sub3(b, a), sub3(c, a));
    let n = cross3(u, v);
    let nn = dot3(n, n);
    if nn == 0.0 {
        return None;
    }
    let (uu, vv) = (dot3(u, u), dot3(v, v));
    let t1 = cross3(n, u);
    let t2 = cross3(v, n);
    let off = [
        (uu * t2[0] + vv * t1[0]) / (2.0 * nn),
        (uu * t2[1] + vv * t1[1]) / (2.0 * nn),
        (uu * t2[2] + vv * t1[2]) / (2.0 * nn),
    ];
    Some(([a[0] + off[0], a[1] + off[1], a[2] + off[2]], norm3(off)))
}

/// The α radius in meters: `alpha × scale`, except that `alpha = 1` admits
/// every Delaunay cell.
///
/// Near-flat cells on the hull of any real point set have circumradii far
/// beyond the bounding diagonal, so the top of the range is pinned to the
/// full complex to make `α = 1` exactly the convex hull.
pub fn effective_alpha(alpha: AlphaParam, scale: f64) -> f64 {
    if alpha.get() >= 1.0 {
        f64::INFINITY
    } else {
        alpha.get() * scale
    }
}

/// Cells whose circumradius is within `alpha_eff`.
pub fn interior_cells(complex: &TetraComplex, alpha_eff: f64) -> Vec<bool> {
    complex
        .circumspheres()
        .iter()
        .map(|s| s.radius <= alpha_eff)
        .collect()
}

/// Surface of the α-complex with `α_eff = alpha × scale`.
pub fn alpha_complex_boundary(
    complex: &TetraComplex,
    alpha: AlphaParam,
    scale: f64,
) -> Result<TriangleMesh, ReconstructError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ReconstructError::InvalidScale(scale));
    }
    let alpha_eff = effective_alpha(alpha, scale);
    let interior = interior_cells(complex, alpha_eff);
    let verts = complex.vertices();
    let mut triangles = Vec::new();

    for (t, nbrs) in complex.neighbors().iter().enumerate() {
        for (i, nbr) in nbrs.iter().enumerate() {
            let other_interior = nbr.is_some_and(|u| interior[u]);
            if interior[t] {
                if !other_interior {
                    triangles.push(complex.face(t, i));
                }
                continue;
            }
            if other_interior {
                continue;
            }
            // each exterior/exterior face is visited from its lower-index side
            if nbr.is_some_and(|u| u < t) {
                continue;
            }
            let face = complex.face(t, i);
            let Some((center, radius)) = triangle_circumcircle(face.map(|v| verts[v])) else {
                continue;
            };
            if radius > alpha_eff {
                continue;
            }
            let opposite = |cell: usize| {
                let tet = complex.tetrahedra()[cell];
                tet.into_iter().find(|v| !face.contains(v)).unwrap()
            };
            let exposed = std::iter::once(t)
                .chain(*nbr)
                .all(|cell| dist3(verts[opposite(cell)], center) >= radius);
            if exposed {
                triangles.push(face);
            }
        }
    }

    let mesh = TriangleMesh::new(verts.to_vec(), triangles);
    if mesh.is_empty() {
        return Err(ReconstructError::EmptyAlphaComplex { alpha: alpha.get() });
    }
    Ok(mesh)
}

/// Length of the axis-aligned bounding-box diagonal.
pub fn bbox_diagonal(points: &[[f64; 3]]) -> f64 {
    aabb(points.iter().copied()).map_or(0.0, |(lo, hi)| dist3(lo, hi))
}

/// α-shape surface of `cloud` at resolution `alpha`.
pub fn reconstruct(cloud: &PointCloud, alpha: AlphaParam) -> Result<TriangleMesh, ReconstructError> {
    if cloud.len() < MIN_CLOUD_POINTS {
        return Err(ReconstructError::TooFewPoints {
            required: MIN_CLOUD_POINTS,
            got: cloud.len(),
        });
    }
    let positions = cloud.positions();
    let complex = delaunay3d(&positions)?;
    alpha_complex_boundary(&complex, alpha, bbox_diagonal(&positions))
}
