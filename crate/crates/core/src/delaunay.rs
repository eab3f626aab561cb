//! Incremental 3D Delaunay tetrahedralization (Bowyer-Watson).
//!
//! The convex hull is closed off with "ghost" cells that share a vertex at
//! infinity, so hull faces need no bounding super-simplex. Orientation and
//! in-sphere decisions use Shewchuk's adaptive exact predicates. Points are
//! inserted in input order (after the four seed vertices), which makes the
//! output a pure function of the input; cospherical ties resolve to "not in
//! conflict", with the cavity grown across any face that would otherwise
//! produce a flat cell.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use robust::{insphere, orient3d, Coord3D};
use thiserror::Error;

use crate::geometry::{cross3, dot3, norm3, sub3};

/// Minimum thickness (m) of a point set along its thinnest principal direction.
pub const MIN_THICKNESS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Finite Delaunay cells over a vertex list.
///
/// Cells are positively oriented (`robust::orient3d(v0, v1, v2, v3) > 0`).
/// `neighbors[t][i]` is the cell across the face opposite vertex `i`, or
/// `None` on the convex hull. Duplicate input points are left unreferenced.
#[derive(Debug, Clone, PartialEq)]
pub struct TetraComplex {
    vertices: Vec<[f64; 3]>,
    tetrahedra: Vec<[usize; 4]>,
    neighbors: Vec<[Option<usize>; 4]>,
    circumspheres: Vec<Sphere>,
}

/// Vertex slots of the face opposite slot `i`, ordered so that its
/// right-hand normal points away from the opposite vertex.
pub const FACE_SLOTS: [[usize; 3]; 4] = [[2, 1, 3], [0, 2, 3], [1, 0, 3], [0, 1, 2]];

impl TetraComplex {
    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 4]] {
        &self.neighbors
    }

    pub fn circumspheres(&self) -> &[Sphere] {
        &self.circumspheres
    }

    pub fn len(&self) -> usize {
        self.tetrahedra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tetrahedra.is_empty()
    }

    /// Outward-oriented vertex indices of face `i` of cell `t`.
    pub fn face(&self, t: usize, i: usize) -> [usize; 3] {
        let tet = self.tetrahedra[t];
        FACE_SLOTS[i].map(|s| tet[s])
    }

    pub fn volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tetrahedra[t].map(|v| self.vertices[v]);
        dot3(sub3(b, a), cross3(sub3(c, a), sub3(d, a))).abs() / 6.0
    }

    /// Faces on the convex hull as `(cell, slot)` pairs.
    pub fn hull_faces(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(t, n)| (0..4).filter(move |&i| n[i].is_none()).map(move |i| (t, i)))
    }
}

/// Delaunay tetrahedralization of `points`.
pub fn delaunay3d(points: &[[f64; 3]]) -> Result<TetraComplex, DelaunayError> {
    if points.len() < 4 {
        return Err(DelaunayError::TooFewPoints {
            required: 4,
            got: points.len(),
        });
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(DelaunayError::DegenerateGeometry("non-finite coordinate"));
    }
    if thickness(points) <= MIN_THICKNESS {
        return Err(DelaunayError::DegenerateGeometry("points are coplanar or collinear"));
    }
    let seed = seed_simplex(points)
        .ok_or(DelaunayError::DegenerateGeometry("no four affinely independent points"))?;

    let mut tri = Triangulation::new(points, seed);
    for (i, _) in points.iter().enumerate() {
        if !seed.contains(&i) {
            tri.insert(i as u32)?;
        }
    }
    Ok(tri.finish())
}

/// Extent of the point set along its direction of least variance.
pub fn thickness(points: &[[f64; 3]]) -> f64 {
    let n = points.len() as f64;
    let mut mean = Vector3::zeros();
    for p in points {
        mean += Vector3::from(*p);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let axis = eig.eigenvectors.column(k).into_owned();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let s = (Vector3::from(*p) - mean).dot(&axis);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    hi - lo
}

/// Circumsphere of a tetrahedron, `None` when it is flat in floating point.
pub fn circumsphere(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> Option<Sphere> {
    let (u, v, w) = (sub3(b, a), sub3(c, a), sub3(d, a));
    let denom = 2.0 * dot3(u, cross3(v, w));
    if denom == 0.0 {
        return None;
    }
    let (uu, vv, ww) = (dot3(u, u), dot3(v, v), dot3(w, w));
    let vw = cross3(v, w);
    let wu = cross3(w, u);
    let uv = cross3(u, v);
    let off = [
        (uu * vw[0] + vv * wu[0] + ww * uv[0]) / denom,
        (uu * vw[1] + vv * wu[1] + ww * uv[1]) / denom,
        (uu * vw[2] + vv * wu[2] + ww * uv[2]) / denom,
    ];
    let center = [a[0] + off[0], a[1] + off[1], a[2] + off[2]];
    let radius = norm3(off);
    radius.is_finite().then_some(Sphere { center, radius })
}

pub(crate) fn orient(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    orient3d(coord(a), coord(b), coord(c), coord(d))
}

fn coord(p: [f64; 3]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

fn collinear(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> bool {
    use robust::{orient2d, Coord};
    let proj = |p: [f64; 3], i: usize, j: usize| Coord { x: p[i], y: p[j] };
    [(0, 1), (1, 2), (2, 0)]
        .iter()
        .all(|&(i, j)| orient2d(proj(a, i, j), proj(b, i, j), proj(c, i, j)) == 0.0)
}

/// Whether `p`, known to lie in the plane of `abc`, is strictly inside the
/// triangle's circumcircle. Any sphere through `a, b, c` cuts that plane in
/// the circumcircle, so an exact in-sphere test against a lifted fourth point
/// decides it.
fn in_coplanar_circle(a: [f64; 3], b: [f64; 3], c: [f64; 3], p: [f64; 3]) -> bool {
    let n = cross3(sub3(b, a), sub3(c, a));
    let e = [a[0] + n[0], a[1] + n[1], a[2] + n[2]];
    let o = orient(a, b, c, e);
    if o == 0.0 {
        return false;
    }
    let s = insphere(coord(a), coord(b), coord(c), coord(e), coord(p));
    s * o.signum() > 0.0
}

fn seed_simplex(points: &[[f64; 3]]) -> Option<[usize; 4]> {
    let a = 0;
    let b = (1..points.len()).find(|&j| points[j] != points[a])?;
    let c = (1..points.len()).find(|&k| !collinear(points[a], points[b], points[k]))?;
    let d = (1..points.len())
        .find(|&l| orient(points[a], points[b], points[c], points[l]) != 0.0)?;
    Some([a, b, c, d])
}

const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Cell {
    v: [u32; 4],
    n: [u32; 4],
    alive: bool,
}

impl Cell {
    fn is_ghost(&self) -> bool {
        self.v[3] == INF
    }
}

struct Triangulation<'a> {
    pts: &'a [[f64; 3]],
    cells: Vec<Cell>,
    free: Vec<u32>,
    last: u32,
    // scratch
    mark: Vec<u32>,
    stamp: u32,
}

impl<'a> Triangulation<'a> {
    fn new(pts: &'a [[f64; 3]], seed: [usize; 4]) -> Self {
        let [mut a, mut b, c, d] = seed.map(|i| i as u32);
        if orient(pts[a as usize], pts[b as usize], pts[c as usize], pts[d as usize]) < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
        let mut tri = Self {
            pts,
            cells: Vec::new(),
            free: Vec::new(),
            last: 0,
            mark: Vec::new(),
            stamp: 0,
        };
        let root = [a, b, c, d];
        let mut ids = vec![tri.alloc(root)];
        for i in 0..4 {
            let [x, y, z] = FACE_SLOTS[i].map(|s| root[s]);
            // ghost bases face inward: points beyond the hull orient positively
            ids.push(tri.alloc([y, x, z, INF]));
        }
        tri.link(&ids);
        tri
    }

    fn p(&self, v: u32) -> [f64; 3] {
        self.pts[v as usize]
    }

    fn alloc(&mut self, v: [u32; 4]) -> u32 {
        let cell = Cell {
            v,
            n: [NONE; 4],
            alive: true,
        };
        if let Some(id) = self.free.pop() {
            self.cells[id as usize] = cell;
            self.mark[id as usize] = 0;
            id
        } else {
            self.cells.push(cell);
            self.mark.push(0);
            (self.cells.len() - 1) as u32
        }
    }

    /// Connects the still-unlinked faces of `ids` that coincide.
    fn link(&mut self, ids: &[u32]) {
        let mut open: HashMap<[u32; 3], (u32, usize)> = HashMap::new();
        for &t in ids {
            for i in 0..4 {
                if self.cells[t as usize].n[i] != NONE {
                    continue;
                }
                let mut key = FACE_SLOTS[i].map(|s| self.cells[t as usize].v[s]);
                key.sort_unstable();
                if let Some((u, j)) = open.remove(&key) {
                    self.cells[t as usize].n[i] = u;
                    self.cells[u as usize].n[j] = t;
                } else {
                    open.insert(key, (t, i));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched faces after linking");
    }

    fn in_conflict(&self, t: u32, p: [f64; 3]) -> bool {
        let cell = &self.cells[t as usize];
        let [a, b, c] = [cell.v[0], cell.v[1], cell.v[2]].map(|v| self.p(v));
        if cell.is_ghost() {
            let o = orient(a, b, c, p);
            o > 0.0 || (o == 0.0 && in_coplanar_circle(a, b, c, p))
        } else {
            let d = self.p(cell.v[3]);
            insphere(coord(a), coord(b), coord(c), coord(d), coord(p)) > 0.0
        }
    }

    /// Orientation of cell `t` with slot `i` replaced by `p`.
    fn orient_replaced(&self, t: u32, i: usize, p: [f64; 3]) -> f64 {
        let v = self.cells[t as usize].v;
        let mut q = v.map(|x| if x == INF { [0.0; 3] } else { self.p(x) });
        q[i] = p;
        orient(q[0], q[1], q[2], q[3])
    }

    /// Visibility walk to a cell containing `p`, or a ghost whose hull face
    /// `p` lies strictly beyond.
    fn locate(&self, p: [f64; 3]) -> Option<u32> {
        let mut t = self.last;
        if !self.cells[t as usize].alive {
            t = self.cells.iter().position(|c| c.alive)? as u32;
        }
        if self.cells[t as usize].is_ghost() {
            t = self.cells[t as usize].n[3];
        }
        let limit = 4 * self.cells.len() + 16;
        'walk: for step in 0..limit {
            let cell = &self.cells[t as usize];
            if cell.is_ghost() {
                return Some(t);
            }
            // rotate the starting face so the walk cannot lock into a cycle
            for k in 0..4 {
                let i = (k + step) % 4;
                if self.orient_replaced(t, i, p) < 0.0 {
                    t = cell.n[i];
                    continue 'walk;
                }
            }
            return Some(t);
        }
        None
    }

    fn insert(&mut self, pi: u32) -> Result<(), DelaunayError> {
        let p = self.p(pi);
        let start = match self.locate(p) {
            Some(t) if self.in_conflict(t, p) => Some(t),
            Some(t) if self.is_vertex_of(t, p) => return Ok(()),
            _ => self.scan_conflict(p),
        };
        let Some(start) = start else {
            // only duplicates of existing vertices end up here
            return if self.has_vertex_at(p) {
                Ok(())
            } else {
                Err(DelaunayError::DegenerateGeometry("no conflicting cell for point"))
            };
        };

        self.stamp += 1;
        let stamp = self.stamp;
        let mut cavity = vec![start];
        self.mark[start as usize] = stamp;
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for i in 0..4 {
                let u = self.cells[t as usize].n[i];
                if self.mark[u as usize] != stamp && self.in_conflict(u, p) {
                    self.mark[u as usize] = stamp;
                    cavity.push(u);
                    stack.push(u);
                }
            }
        }

        // grow across faces that would yield flat or inverted cells
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            'scan: for &t in &cavity {
                for i in 0..4 {
                    let u = self.cells[t as usize].n[i];
                    if self.mark[u as usize] == stamp {
                        continue;
                    }
                    if !self.valid_new_cell(t, i, pi) {
                        grow = Some(u);
                        break 'scan;
                    }
                    boundary.push((t, i));
                }
            }
            match grow {
                Some(u) => {
                    self.mark[u as usize] = stamp;
                    cavity.push(u);
                    if cavity.len() == self.cells.len() - self.free.len() {
                        return Err(DelaunayError::DegenerateGeometry("cavity swallowed the triangulation"));
                    }
                }
                None => break boundary,
            }
        };

        // every cavity vertex must stay on the cavity boundary
        let mut on_boundary: Vec<u32> = boundary
            .iter()
            .flat_map(|&(t, i)| FACE_SLOTS[i].map(|s| self.cells[t as usize].v[s]))
            .collect();
        on_boundary.sort_unstable();
        on_boundary.dedup();
        for &t in &cavity {
            for v in self.cells[t as usize].v {
                if on_boundary.binary_search(&v).is_err() {
                    return Err(DelaunayError::DegenerateGeometry("cavity would orphan a vertex"));
                }
            }
        }

        let mut created = Vec::with_capacity(boundary.len());
        for &(t, i) in &boundary {
            let outside = self.cells[t as usize].n[i];
            let mut v = self.cells[t as usize].v;
            v[i] = pi;
            let id = self.alloc(v);
            self.cells[id as usize].n[i] = outside;
            let back = self.cells[outside as usize]
                .n
                .iter()
                .position(|&x| x == t)
                .expect("neighbor relation is symmetric");
            self.cells[outside as usize].n[back] = id;
            created.push(id);
        }
        for &t in &cavity {
            self.cells[t as usize].alive = false;
            self.free.push(t);
        }
        self.link(&created);
        self.last = created[0];
        Ok(())
    }

    fn valid_new_cell(&self, t: u32, i: usize, pi: u32) -> bool {
        let mut v = self.cells[t as usize].v;
        v[i] = pi;
        if v[3] != INF {
            let [a, b, c, d] = v.map(|x| self.p(x));
            return orient(a, b, c, d) > 0.0;
        }
        let [a, b, c] = [v[0], v[1], v[2]].map(|x| self.p(x));
        !collinear(a, b, c)
    }

    fn is_vertex_of(&self, t: u32, p: [f64; 3]) -> bool {
        self.cells[t as usize]
            .v
            .iter()
            .any(|&v| v != INF && self.p(v) == p)
    }

    fn has_vertex_at(&self, p: [f64; 3]) -> bool {
        self.cells
            .iter()
            .filter(|c| c.alive)
            .any(|c| c.v.iter().any(|&v| v != INF && self.p(v) == p))
    }

    fn scan_conflict(&self, p: [f64; 3]) -> Option<u32> {
        (0..self.cells.len() as u32).find(|&t| self.cells[t as usize].alive && self.in_conflict(t, p))
    }

    fn finish(self) -> TetraComplex {
        let mut remap = vec![usize::MAX; self.cells.len()];
        let mut tetrahedra = Vec::new();
        for (id, c) in self.cells.iter().enumerate() {
            if c.alive && !c.is_ghost() {
                remap[id] = tetrahedra.len();
                tetrahedra.push(c.v.map(|v| v as usize));
            }
        }
        let mut neighbors = Vec::with_capacity(tetrahedra.len());
        for c in self.cells.iter().filter(|c| c.alive && !c.is_ghost()) {
            neighbors.push(c.n.map(|u| {
                let r = remap[u as usize];
                (r != usize::MAX).then_some(r)
            }));
        }
        let circumspheres = tetrahedra
            .iter()
            .map(|t| {
                let [a, b, c, d] = t.map(|v| self.pts[v]);
                circumsphere(a, b, c, d).unwrap_or(Sphere {
                    center: a,
                    radius: f64::INFINITY,
                })
            })
            .collect();
        TetraComplex {
            vertices: self.pts.to_vec(),
            tetrahedra,
            neighbors,
            circumspheres,
        }
    }
}
