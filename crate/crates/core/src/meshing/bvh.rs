//! Bounding-volume hierarchy over triangles for nearest-hit ray queries.

use super::mesh::TriMesh;
use crate::Vec3;

/// Barycentric and parametric slack of the triangle test.
pub const RAY_SLACK: f64 = 1e-9;
/// Hits closer than this along the ray are ignored.
pub const RAY_T_MIN: f64 = 1e-9;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    pub triangle: usize,
    pub distance: f64,
    /// Barycentric weights of the second and third vertex.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start+count` into `order`. Interior: children at
    /// `start` and `start + 1`, `count == 0`.
    start: usize,
    count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// Möller–Trumbore test; two-sided, returns `(t, u, v)`.
#[inline]
pub fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if u < -RAY_SLACK || u > 1.0 + RAY_SLACK {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -RAY_SLACK || u + v > 1.0 + RAY_SLACK {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > RAY_T_MIN).then_some((t, u, v))
}

/// Nearest of two candidate hits; equal distances go to the lower triangle
/// index so results never depend on traversal order.
#[inline]
fn better(t: f64, tri: usize, best: &Option<(f64, usize, f64, f64)>) -> bool {
    match best {
        None => true,
        Some((bt, bi, _, _)) => t < *bt || (t == *bt && tri < *bi),
    }
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let n = mesh.triangles().len();
        let boxes: Vec<(Vec3, Vec3, Vec3)> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                let lo = a.inf(&b).inf(&c);
                let hi = a.sup(&b).sup(&c);
                // Inflate so slack hits just outside a triangle stay inside its box.
                let pad = Vec3::repeat(1e-7 * ((hi - lo).norm() + 1.0));
                (lo - pad, hi + pad, (a + b + c) / 3.0)
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..n).collect() };
        if n > 0 {
            bvh.nodes.push(Node { lo: Vec3::zeros(), hi: Vec3::zeros(), start: 0, count: 0 });
            bvh.split(0, 0, n, &boxes);
        }
        bvh
    }

    fn split(&mut self, node: usize, start: usize, end: usize, boxes: &[(Vec3, Vec3, Vec3)]) {
        let items = &mut self.order[start..end];
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        let (mut clo, mut chi) = (lo, hi);
        for &i in items.iter() {
            lo = lo.inf(&boxes[i].0);
            hi = hi.sup(&boxes[i].1);
            clo = clo.inf(&boxes[i].2);
            chi = chi.sup(&boxes[i].2);
        }
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        let extent = chi - clo;
        if end - start <= LEAF_SIZE || extent.max() <= 0.0 {
            self.nodes[node].start = start;
            self.nodes[node].count = end - start;
            return;
        }
        let axis = extent.imax();
        let mid = (end - start) / 2;
        items.select_nth_unstable_by(mid, |&a, &b| {
            boxes[a].2[axis].total_cmp(&boxes[b].2[axis]).then(a.cmp(&b))
        });
        let left = self.nodes.len();
        let blank = Node { lo, hi, start: 0, count: 0 };
        self.nodes.push(blank);
        self.nodes.push(blank);
        self.nodes[node].start = left;
        self.nodes[node].count = 0;
        self.split(left, start, start + mid, boxes);
        self.split(left + 1, start + mid, end, boxes);
    }

    /// Entry distance of the ray into a node's box, if it enters before `tmax`.
    #[inline]
    fn enter(node: &Node, origin: &Vec3, inv: &Vec3, tmax: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = tmax;
        for a in 0..3 {
            let (mut near, mut far) = ((node.lo[a] - origin[a]) * inv[a], (node.hi[a] - origin[a]) * inv[a]);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the origin lies on the slab plane: keep it.
            if !near.is_nan() {
                t0 = t0.max(near);
            }
            if !far.is_nan() {
                t1 = t1.min(far);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    pub fn intersect(&self, mesh: &TriMesh, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let tmax = best.map_or(f64::INFINITY, |b| b.0 * (1.0 + 1e-12) + 1e-12);
            if Self::enter(node, origin, &inv, tmax).is_none() {
                continue;
            }
            if node.count > 0 {
                for &tri in &self.order[node.start..node.start + node.count] {
                    if let Some((t, u, v)) = intersect_triangle(origin, dir, &mesh.triangle(tri)) {
                        if better(t, tri, &best) {
                            best = Some((t, tri, u, v));
                        }
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                let tl = Self::enter(&self.nodes[l], origin, &inv, tmax);
                let tr = Self::enter(&self.nodes[r], origin, &inv, tmax);
                // Push the farther child first so the nearer one is visited first.
                match (tl, tr) {
                    (Some(a), Some(b)) if a <= b => stack.extend([r, l]),
                    (Some(_), Some(_)) => stack.extend([l, r]),
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best.map(|(t, tri, u, v)| Hit { point: origin + dir * t, triangle: tri, distance: t, u, v })
    }
}

/// Exhaustive nearest-hit scan; the reference the hierarchy must agree with.
pub fn ray_intersect_brute(mesh: &TriMesh, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
    let mut best = None;
    for tri in 0..mesh.triangles().len() {
        if let Some((t, u, v)) = intersect_triangle(origin, dir, &mesh.triangle(tri)) {
            if better(t, tri, &best) {
                best = Some((t, tri, u, v));
            }
        }
    }
    best.map(|(t, tri, u, v)| Hit { point: origin + dir * t, triangle: tri, distance: t, u, v })
}
