use std::sync::OnceLock;

use super::bvh::Bvh;
use super::MeshError;
use crate::Vec3;

/// Triangle surface mesh.
///
/// Vertex normals and the ray-casting hierarchy are built lazily on first
/// use; the mesh itself never changes after construction.
#[derive(Debug, Default)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: OnceLock<Vec<Vec3>>,
    corner_normals: OnceLock<Vec<[Vec3; 3]>>,
    bvh: OnceLock<Bvh>,
}

/// Faces meeting at a sharper angle than this keep separate normals.
pub const CREASE_ANGLE: f64 = std::f64::consts::FRAC_PI_3;

impl Clone for TriMesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            normals: OnceLock::new(),
            corner_normals: OnceLock::new(),
            bvh: OnceLock::new(),
        }
    }
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

/// Twice the area vector of a triangle.
#[inline]
pub(crate) fn cross_area(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

impl TriMesh {
    /// Build a mesh, rejecting out-of-range indices and non-finite vertices,
    /// and dropping triangles with zero area.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::Invalid("non-finite vertex".into()));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(MeshError::Invalid(format!("triangle {t:?} indexes past {n} vertices")));
        }
        let triangles = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                cross_area(&a, &b, &c).norm_squared() > 0.0
            })
            .collect();
        Ok(Self { vertices, triangles, normals: OnceLock::new(), corner_normals: OnceLock::new(), bvh: OnceLock::new() })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Unit face normal following the winding (right-hand rule).
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        cross_area(&a, &b, &c).normalize()
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> &[Vec3] {
        self.normals.get_or_init(|| {
            let mut acc = vec![Vec3::zeros(); self.vertices.len()];
            for t in &self.triangles {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                let n = cross_area(&a, &b, &c);
                for &i in t {
                    acc[i as usize] += n;
                }
            }
            acc.into_iter()
                .map(|n| {
                    let len = n.norm();
                    if len > 0.0 {
                        n / len
                    } else {
                        n
                    }
                })
                .collect()
        })
    }

    /// Per-corner normals: at each corner, the area-weighted mean of the
    /// faces around that vertex lying within [`CREASE_ANGLE`] of the
    /// corner's own face. Smooth surfaces blend; box edges stay sharp.
    pub fn corner_normals(&self) -> &[[Vec3; 3]] {
        self.corner_normals.get_or_init(|| {
            let areas: Vec<Vec3> = (0..self.triangles.len())
                .map(|t| {
                    let [a, b, c] = self.triangle(t);
                    cross_area(&a, &b, &c)
                })
                .collect();
            let mut around = vec![Vec::new(); self.vertices.len()];
            for (t, tri) in self.triangles.iter().enumerate() {
                for &i in tri {
                    around[i as usize].push(t);
                }
            }
            let cos = CREASE_ANGLE.cos();
            self.triangles
                .iter()
                .enumerate()
                .map(|(t, tri)| {
                    let own = areas[t].normalize();
                    tri.map(|i| {
                        let n: Vec3 = around[i as usize]
                            .iter()
                            .map(|&s| areas[s])
                            .filter(|a| a.normalize().dot(&own) >= cos)
                            .sum();
                        n.normalize()
                    })
                })
                .collect()
        })
    }

    /// Normal at barycentric `(u, v)` of triangle `t`, blended from its
    /// corner normals and falling back to the face normal when the blend
    /// vanishes.
    pub fn interpolated_normal(&self, t: usize, u: f64, v: f64) -> Vec3 {
        let [a, b, c] = self.corner_normals()[t];
        let n = a * (1.0 - u - v) + b * u + c * v;
        let len = n.norm();
        if len > 1e-12 {
            n / len
        } else {
            self.face_normal(t)
        }
    }

    pub(crate) fn bvh(&self) -> &Bvh {
        self.bvh.get_or_init(|| Bvh::build(self))
    }

    /// Signed enclosed volume (divergence theorem). Positive for closed,
    /// outward-wound meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                0.5 * cross_area(&a, &b, &c).norm()
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    /// Area-weighted surface centroid.
    pub fn centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let w = cross_area(&a, &b, &c).norm();
            acc += (a + b + c) * (w / 3.0);
            total += w;
        }
        if total > 0.0 {
            acc / total
        } else {
            Vec3::zeros()
        }
    }

    /// Radius of the smallest sphere around `center` holding every vertex.
    pub fn radius_about(&self, center: &Vec3) -> f64 {
        self.vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max)
    }

    /// True iff every undirected edge is shared by exactly two triangles
    /// with opposite orientation.
    pub fn is_closed(&self) -> bool {
        use std::collections::HashMap;
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let (key, dir) = if a < b { ((a, b), 1) } else { ((b, a), -1) };
                *edges.entry(key).or_default() += dir;
            }
        }
        !self.triangles.is_empty() && edges.values().all(|&c| c == 0)
    }

    /// Euclidean distance from `p` to the closest point of the surface
    /// (exhaustive scan).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Inside test by ray-crossing parity along a fixed skew direction.
    pub fn contains(&self, p: &Vec3) -> bool {
        let dir = Vec3::new(0.5773, 0.5774, 0.5775).normalize();
        let mut origin = *p;
        let mut crossings = 0;
        while let Some(hit) = super::ray_intersect(self, &origin, &dir) {
            crossings += 1;
            origin = hit.point + dir * 1e-9;
            if crossings > 10_000 {
                break;
            }
        }
        crossings % 2 == 1
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Axis-aligned box `[lo, hi]` as a closed, outward-wound mesh.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(if x { hi.x } else { lo.x }, if y { hi.y } else { lo.y }, if z { hi.z } else { lo.z })
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let triangles = vec![
        [0, 2, 1], [0, 3, 2], // -z
        [4, 5, 6], [4, 6, 7], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [3, 7, 6], [3, 6, 2], // +y
        [0, 4, 7], [0, 7, 3], // -x
        [1, 2, 6], [1, 6, 5], // +x
    ];
    TriMesh::new(vertices, triangles).expect("box mesh is valid")
}

/// UV sphere with `rings` latitude bands and `segments` longitude slices.
pub fn uv_sphere(center: Vec3, radius: f64, rings: usize, segments: usize) -> TriMesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(
                center
                    + Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius,
            );
        }
    }
    vertices.push(center - Vec3::new(0.0, 0.0, radius));
    let south = (vertices.len() - 1) as u32;
    let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
        triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    TriMesh::new(vertices, triangles).expect("sphere mesh is valid")
}
