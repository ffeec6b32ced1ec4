//! Iso-surface extraction.
//!
//! Samples sit at voxel centers. The sample lattice is padded with one layer
//! of zeros on every side and each lattice cube is split into six
//! tetrahedra around its main diagonal (Kuhn triangulation). That split is
//! the same on both sides of every shared face, so edge vertices shared by
//! neighbours coincide and the result is closed, with no ambiguous cases.

use std::collections::HashMap;

use super::mesh::{cross_area, TriMesh};
use super::MeshError;
use crate::voxelgrid::{PointCloud, VoxelError, VoxelGrid};
use crate::Vec3;

/// Interpolation parameters are kept this far from the edge ends so no
/// triangle collapses onto a lattice point.
const T_MARGIN: f64 = 1e-4;

/// The six tetrahedra of a cube, as corner bit masks (x=1, y=2, z=4).
const KUHN: [[u8; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

struct Lattice<'a> {
    grid: &'a VoxelGrid,
    /// Padded dims.
    n: [usize; 3],
}

impl Lattice<'_> {
    /// Value at padded coordinates (grid index + 1).
    fn value(&self, p: [usize; 3]) -> f64 {
        let d = self.grid.dims();
        if (0..3).any(|a| p[a] == 0 || p[a] > d[a]) {
            0.0
        } else {
            self.grid.get(p[0] - 1, p[1] - 1, p[2] - 1)
        }
    }

    fn id(&self, p: [usize; 3]) -> u64 {
        ((p[0] * self.n[1] + p[1]) * self.n[2] + p[2]) as u64
    }

    fn position(&self, p: [usize; 3]) -> Vec3 {
        let f = self.grid.frame();
        f.origin + Vec3::new(p[0] as f64 - 0.5, p[1] as f64 - 0.5, p[2] as f64 - 0.5) * f.resolution
    }
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    edges: HashMap<(u64, u64), u32>,
}

impl Builder {
    fn edge_vertex(&mut self, lat: &Lattice, iso: f64, a: [usize; 3], b: [usize; 3]) -> u32 {
        let (ia, ib) = (lat.id(a), lat.id(b));
        let (a, b, key) = if ia < ib { (a, b, (ia, ib)) } else { (b, a, (ib, ia)) };
        if let Some(&v) = self.edges.get(&key) {
            return v;
        }
        let (va, vb) = (lat.value(a), lat.value(b));
        let t = ((iso - va) / (vb - va)).clamp(T_MARGIN, 1.0 - T_MARGIN);
        let (pa, pb) = (lat.position(a), lat.position(b));
        let id = self.vertices.len() as u32;
        self.vertices.push(pa + (pb - pa) * t);
        self.edges.insert(key, id);
        id
    }

    /// Add a triangle wound so its normal points along `outward`.
    fn push(&mut self, mut tri: [u32; 3], outward: &Vec3) {
        let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
        if cross_area(&a, &b, &c).dot(outward) < 0.0 {
            tri.swap(1, 2);
        }
        self.triangles.push(tri);
    }
}

/// Triangle mesh of the `iso` level set, wound with outward normals
/// (pointing from values >= iso toward values < iso).
pub fn marching_cubes(grid: &VoxelGrid, iso: f64) -> Result<TriMesh, MeshError> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(MeshError::InvalidIso(iso));
    }
    let d = grid.dims();
    let lat = Lattice { grid, n: [d[0] + 2, d[1] + 2, d[2] + 2] };
    let mut b = Builder::default();
    for x in 0..lat.n[0] - 1 {
        for y in 0..lat.n[1] - 1 {
            for z in 0..lat.n[2] - 1 {
                let corner = |m: u8| [x + (m & 1) as usize, y + ((m >> 1) & 1) as usize, z + ((m >> 2) & 1) as usize];
                let vals: [f64; 8] = std::array::from_fn(|m| lat.value(corner(m as u8)));
                let inside_count = vals.iter().filter(|&&v| v >= iso).count();
                if inside_count == 0 || inside_count == 8 {
                    continue;
                }
                for tet in KUHN {
                    let pts = tet.map(corner);
                    let inside = tet.map(|m| vals[m as usize] >= iso);
                    let ins: Vec<usize> = (0..4).filter(|&i| inside[i]).collect();
                    let outs: Vec<usize> = (0..4).filter(|&i| !inside[i]).collect();
                    if ins.is_empty() || outs.is_empty() {
                        continue;
                    }
                    let mean = |idx: &[usize]| {
                        idx.iter().map(|&i| lat.position(pts[i])).sum::<Vec3>() / idx.len() as f64
                    };
                    let outward = mean(&outs) - mean(&ins);
                    match (ins.len(), outs.len()) {
                        (1, 3) => {
                            let a = pts[ins[0]];
                            let tri = [0, 1, 2].map(|j| b.edge_vertex(&lat, iso, a, pts[outs[j]]));
                            b.push(tri, &outward);
                        }
                        (3, 1) => {
                            let o = pts[outs[0]];
                            let tri = [0, 1, 2].map(|j| b.edge_vertex(&lat, iso, pts[ins[j]], o));
                            b.push(tri, &outward);
                        }
                        _ => {
                            let (i0, i1, o0, o1) = (pts[ins[0]], pts[ins[1]], pts[outs[0]], pts[outs[1]]);
                            // Quad in cyclic order i0o0, i0o1, i1o1, i1o0.
                            let q = [
                                b.edge_vertex(&lat, iso, i0, o0),
                                b.edge_vertex(&lat, iso, i0, o1),
                                b.edge_vertex(&lat, iso, i1, o1),
                                b.edge_vertex(&lat, iso, i1, o0),
                            ];
                            b.push([q[0], q[1], q[2]], &outward);
                            b.push([q[0], q[2], q[3]], &outward);
                        }
                    }
                }
            }
        }
    }
    let mesh = TriMesh::new(b.vertices, b.triangles)?;
    if mesh.is_empty() {
        return Err(MeshError::EmptyLevelSet);
    }
    Ok(mesh)
}

/// Force every voxel holding an observed point to 1, then extract the 0.5
/// level set. The cloud must lie in the grid's frame.
pub fn shape_complete_mesh(grid: &VoxelGrid, cloud: &PointCloud) -> Result<TriMesh, MeshError> {
    if cloud.is_empty() {
        return Err(VoxelError::EmptyCloud.into());
    }
    let outside = cloud.points().iter().filter(|p| grid.frame().cell_of(p).is_none()).count();
    if outside > 0 {
        return Err(MeshError::CloudOutsideFrame(outside));
    }
    marching_cubes(&grid.with_observed(cloud), crate::voxelgrid::DEFAULT_THRESHOLD)
}
