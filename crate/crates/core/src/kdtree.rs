//! Static 3D kd-tree for exact nearest-neighbour queries.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Nearest-neighbour index over a fixed point set.
///
/// Ties in distance resolve to the lowest original index, so results match a
/// linear scan that keeps the first minimum.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    root: Option<Node>,
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = (!points.is_empty()).then(|| build(points, &mut order, 0, points.len()));
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point, `None` when empty.
    pub fn nearest(&self, q: [f64; 3]) -> Option<(usize, f64)> {
        let root = self.root.as_ref()?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(root, q, &mut best);
        Some(best)
    }

    fn search(&self, node: &Node, q: [f64; 3], best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = dist2(self.points[i], q);
                    if better(d, i, *best) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` so equal-distance points on the far side still get a chance at the tie rule
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn better(d: f64, i: usize, best: (usize, f64)) -> bool {
    match d.partial_cmp(&best.1) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => i < best.0,
        _ => false,
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn build(points: &[[f64; 3]], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    // points equal to the split value may sit on either side; searches
    // treat the plane as belonging to both halves
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, order, start, start + mid)),
        right: Box::new(build(points, order, start + mid, end)),
    }
}
