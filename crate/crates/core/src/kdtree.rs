//! Static, array-backed kd-tree over 3D points.

use nalgebra::Vector3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Bounded candidate list ordered by `(squared distance, index)`.
struct Knn {
    k: usize,
    items: Vec<(f64, u32)>,
}

impl Knn {
    #[inline]
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, idx: u32) {
        if self.items.len() == self.k {
            let (wd, wi) = self.items[self.k - 1];
            if d > wd || (d == wd && idx > wi) {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .partition_point(|&(od, oi)| od < d || (od == d && oi < idx));
        self.items.insert(pos, (d, idx));
    }
}

impl KdTree {
    pub fn new<I>(points: I) -> Self
    where
        I: IntoIterator<Item = Vector3<f64>>,
    {
        let points: Vec<[f64; 3]> = points.into_iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            Self::build(&points, &mut order, 0, &mut nodes);
        }
        KdTree {
            points,
            order,
            nodes,
        }
    }

    fn build(points: &[[f64; 3]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
        let id = nodes.len() as u32;
        if order.len() <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                start: offset as u32,
                end: (offset + order.len()) as u32,
            });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in order.iter() {
            let p = &points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let value = points[order[mid] as usize][axis];
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let (left_part, right_part) = order.split_at_mut(mid);
        let left = Self::build(points, left_part, offset, nodes);
        let right = Self::build(points, right_part, offset + mid, nodes);
        nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact `k` nearest neighbors sorted by distance; ties go to the lower index.
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut best = Knn {
            k,
            items: Vec::with_capacity(k + 1),
        };
        self.knn_rec(0, &q, &mut best);
        best.items
            .into_iter()
            .map(|(d, i)| (i as usize, d))
            .collect()
    }

    fn knn_rec(&self, node: u32, q: &[f64; 3], best: &mut Knn) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist2(&self.points[i as usize], q);
                    if d <= best.worst() {
                        best.offer(d, i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, best);
                if diff * diff <= best.worst() {
                    self.knn_rec(far, q, best);
                }
            }
        }
    }

    /// Nearest neighbor within `max_dist`, as `(index, squared distance)`.
    pub fn nearest_within(&self, query: &Vector3<f64>, max_dist: f64) -> Option<(usize, f64)> {
        self.knn(query, 1)
            .into_iter()
            .next()
            .filter(|&(_, d2)| d2 <= max_dist * max_dist)
    }

    /// Indices of all points within `radius` of `query` (unordered).
    pub fn within_radius(&self, query: &Vector3<f64>, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() {
            return;
        }
        let q = [query.x, query.y, query.z];
        self.radius_rec(0, &q, radius * radius, out);
    }

    fn radius_rec(&self, node: u32, q: &[f64; 3], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if dist2(&self.points[i as usize], q) <= r2 {
                        out.push(i as usize);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}
