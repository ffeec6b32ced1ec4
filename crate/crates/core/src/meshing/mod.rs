//! Iso-surface meshes, ray casting and synthetic depth views.

mod bvh;
pub mod io;
mod marching;
mod mesh;
mod render;

use thiserror::Error;

pub use bvh::{intersect_triangle, ray_intersect_brute, Hit, RAY_SLACK, RAY_T_MIN};
pub use marching::{marching_cubes, shape_complete_mesh};
pub use mesh::{box_mesh, closest_point_on_triangle, uv_sphere, TriMesh};
pub use render::{depth_render, Camera};

use crate::voxelgrid::VoxelError;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("no cell straddles the iso level")]
    EmptyLevelSet,
    #[error("iso level {0} outside (0, 1)")]
    InvalidIso(f64),
    #[error("{0} cloud points fall outside the grid frame")]
    CloudOutsideFrame(usize),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("no camera ray hits the mesh")]
    NoVisibleSurface,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// Nearest hit along a ray with `t > RAY_T_MIN`, or `None`. Both triangle
/// sides count.
pub fn ray_intersect(mesh: &TriMesh, origin: &Vec3, direction: &Vec3) -> Option<Hit> {
    mesh.bvh().intersect(mesh, origin, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxelgrid::{GridFrame, PointCloud, VoxelGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_frame(n: usize) -> GridFrame {
        GridFrame::new([n; 3], Vec3::zeros(), 1.0).unwrap()
    }

    #[test]
    fn single_voxel_is_closed_and_small() {
        let mut g = VoxelGrid::zeros(unit_frame(5));
        g.set(2, 2, 2, 1.0);
        let m = marching_cubes(&g, 0.5).unwrap();
        assert!(m.is_closed());
        let v = m.signed_volume();
        assert!(v > 0.0 && v <= 1.0, "volume {v}");
    }

    #[test]
    fn all_zero_grid_has_no_level_set() {
        let g = VoxelGrid::zeros(unit_frame(4));
        assert_eq!(marching_cubes(&g, 0.5).unwrap_err(), MeshError::EmptyLevelSet);
        assert_eq!(marching_cubes(&g, 1.0).unwrap_err(), MeshError::InvalidIso(1.0));
    }

    /// Divergence-theorem volume against voxel count times voxel volume.
    #[test]
    fn block_volume_matches_voxel_count() {
        let res = 0.25;
        let f = GridFrame::new([8; 3], Vec3::new(1.0, -2.0, 0.5), res).unwrap();
        let g = VoxelGrid::from_fn(f, |p| {
            let u = (p - f.origin) / res;
            (2.0..6.0).contains(&u.x) && (2.0..6.0).contains(&u.y) && (2.0..6.0).contains(&u.z)
        });
        assert_eq!(g.occupied_count(), 64);
        let m = marching_cubes(&g, 0.5).unwrap();
        assert!(m.is_closed());
        let expected = 64.0 * res.powi(3);
        let rel = (m.signed_volume() - expected).abs() / expected;
        assert!(rel <= 0.15, "relative volume error {rel}");
    }

    #[test]
    fn block_touching_the_boundary_is_still_closed() {
        let g = VoxelGrid::filled(unit_frame(3), 1.0).unwrap();
        let m = marching_cubes(&g, 0.5).unwrap();
        assert!(m.is_closed());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn clamp_is_noop_when_observed_cells_are_full() {
        let f = unit_frame(6);
        let cloud = PointCloud::new(vec![Vec3::new(2.5, 2.5, 2.5), Vec3::new(3.2, 2.1, 2.9)]).unwrap();
        let g = VoxelGrid::zeros(f).with_observed(&cloud);
        assert_eq!(shape_complete_mesh(&g, &cloud).unwrap(), marching_cubes(&g, 0.5).unwrap());
    }

    #[test]
    fn single_point_gives_one_cell() {
        let f = unit_frame(6);
        let p = Vec3::new(3.3, 1.7, 4.1);
        let cloud = PointCloud::new(vec![p]).unwrap();
        let m = shape_complete_mesh(&VoxelGrid::zeros(f), &cloud).unwrap();
        assert!(m.is_closed());
        let (lo, hi) = m.bounds().unwrap();
        // The surface surrounds the center of cell (3, 1, 4) and stays within
        // half a cell of it.
        let c = Vec3::new(3.5, 1.5, 4.5);
        assert!(m.contains(&c));
        assert!((lo - c).amin() >= -0.5 - 1e-12 && (hi - c).amax() <= 0.5 + 1e-12);
    }

    #[test]
    fn shape_complete_errors() {
        let f = unit_frame(4);
        let empty = PointCloud::new(vec![]).unwrap();
        assert!(matches!(
            shape_complete_mesh(&VoxelGrid::zeros(f), &empty),
            Err(MeshError::Voxel(VoxelError::EmptyCloud))
        ));
        let far = PointCloud::new(vec![Vec3::repeat(9.0)]).unwrap();
        assert_eq!(
            shape_complete_mesh(&VoxelGrid::zeros(f), &far).unwrap_err(),
            MeshError::CloudOutsideFrame(1)
        );
    }

    fn random_grid(seed: u64, n: usize, fill: f64) -> VoxelGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = GridFrame::new([n; 3], Vec3::new(-0.3, 0.2, 0.0), 0.1).unwrap();
        let values = (0..f.len()).map(|_| if rng.gen::<f64>() < fill { rng.gen() } else { 0.0 }).collect();
        VoxelGrid::from_values(f, values).unwrap()
    }

    /// Every observed point is inside the completed surface or within one
    /// voxel diagonal of it.
    #[test]
    fn observed_points_are_on_or_inside_the_surface() {
        for seed in 0..5 {
            let g = random_grid(seed, 8, 0.3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let (lo, hi) = (g.frame().origin, g.frame().upper());
            let pts: Vec<Vec3> = (0..60)
                .map(|_| Vec3::from_fn(|a, _| rng.gen_range(lo[a]..hi[a])))
                .collect();
            let cloud = PointCloud::new(pts).unwrap();
            let m = shape_complete_mesh(&g, &cloud).unwrap();
            let bound = g.resolution() * 3f64.sqrt();
            for p in cloud.points() {
                assert!(m.contains(p) || m.distance_to(p) <= bound);
                assert!(m.distance_to(p) <= bound);
            }
        }
    }

    #[test]
    fn ray_hits_cube_face_at_half() {
        let cube = box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let h = ray_intersect(&cube, &Vec3::zeros(), &Vec3::x()).unwrap();
        assert!((h.distance - 0.5).abs() < 1e-12);
        assert!((h.point.x - 0.5).abs() < 1e-12);
        assert!(ray_intersect(&cube, &Vec3::new(2.0, 0.0, 0.0), &Vec3::x()).is_none());
    }

    /// 10^4 random rays against the exhaustive scan.
    #[test]
    fn bvh_agrees_with_brute_force() {
        let g = random_grid(7, 10, 0.4);
        let m = marching_cubes(&g, 0.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (lo, hi) = m.bounds().unwrap();
        let c = (lo + hi) / 2.0;
        let span = (hi - lo).norm();
        let mut hits = 0;
        for i in 0..10_000 {
            let origin = c + Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * span;
            let dir = if i % 2 == 0 {
                // Aim at a random vertex so plenty of rays graze edges.
                let v = m.vertices()[rng.gen_range(0..m.vertices().len())];
                (v - origin).normalize()
            } else {
                Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize()
            };
            let fast = ray_intersect(&m, &origin, &dir);
            let slow = ray_intersect_brute(&m, &origin, &dir);
            assert_eq!(fast, slow, "ray {i}");
            hits += fast.is_some() as usize;
        }
        assert!(hits > 3000);
    }

    #[test]
    fn front_half_only_from_plus_x() {
        let cube = box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let cam = Camera::new(Vec3::new(3.0, 0.0, 0.0), Vec3::zeros(), 0.8, 32, 24).unwrap();
        let cloud = depth_render(&cube, &cam).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud.points().iter().all(|p| p.x >= 0.0));
    }

    #[test]
    fn doubling_resolution_keeps_old_hits() {
        let s = uv_sphere(Vec3::zeros(), 0.5, 16, 32);
        let small = Camera::new(Vec3::new(0.3, -2.0, 0.4), Vec3::zeros(), 0.9, 12, 9).unwrap();
        let big = Camera { width: 24, height: 18, ..small };
        let a = depth_render(&s, &small).unwrap();
        let b = depth_render(&s, &big).unwrap();
        assert!(b.len() > a.len());
        for row in 0..small.height {
            for col in 0..small.width {
                let ha = ray_intersect(&s, &small.position, &small.ray(col, row));
                let hb = ray_intersect(&s, &big.position, &big.ray(2 * col, 2 * row));
                assert_eq!(ha, hb);
                if let Some(h) = ha {
                    assert!(b.points().contains(&h.point));
                }
            }
        }
    }

    /// Points rendered from a UV sphere lie no farther from the analytic
    /// sphere than the mesh itself deviates from it.
    #[test]
    fn sphere_render_within_discretization_error() {
        let r = 0.5;
        let s = uv_sphere(Vec3::zeros(), r, 12, 24);
        // Worst chordal deviation: largest distance from the analytic sphere
        // over a dense sampling of every triangle.
        let mut bound: f64 = 0.0;
        for t in 0..s.triangles().len() {
            let [a, b, c] = s.triangle(t);
            for i in 0..=10 {
                for j in 0..=10 - i {
                    let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
                    let p = a * (1.0 - u - v) + b * u + c * v;
                    bound = bound.max((p.norm() - r).abs());
                }
            }
        }
        let cam = Camera::new(Vec3::new(0.0, 2.0, 1.0), Vec3::zeros(), 0.7, 40, 40).unwrap();
        let cloud = depth_render(&s, &cam).unwrap();
        for p in cloud.points() {
            assert!((p.norm() - r).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn render_errors() {
        let s = uv_sphere(Vec3::zeros(), 0.5, 8, 8);
        let away = Camera::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, 5.0, 0.0), 0.5, 8, 8).unwrap();
        assert_eq!(depth_render(&s, &away).unwrap_err(), MeshError::NoVisibleSurface);
        assert!(Camera::new(Vec3::zeros(), Vec3::zeros(), 0.5, 8, 8).is_err());
        assert!(Camera::new(Vec3::zeros(), Vec3::x(), 3.2, 8, 8).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn extracted_meshes_are_closed_with_positive_volume(seed in 0u64..10_000, fill in 0.05f64..0.6) {
            let g = random_grid(seed, 6, fill);
            match marching_cubes(&g, 0.5) {
                Ok(m) => {
                    prop_assert!(m.is_closed());
                    prop_assert!(m.signed_volume() > 0.0);
                }
                Err(e) => prop_assert_eq!(e, MeshError::EmptyLevelSet),
            }
        }

        #[test]
        fn clamping_twice_changes_nothing(seed in 0u64..10_000) {
            let g = random_grid(seed, 5, 0.3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let (lo, hi) = (g.frame().origin, g.frame().upper());
            let pts: Vec<Vec3> = (0..10).map(|_| Vec3::from_fn(|a, _| rng.gen_range(lo[a]..hi[a]))).collect();
            let cloud = PointCloud::new(pts).unwrap();
            let once = g.with_observed(&cloud);
            prop_assert_eq!(once.with_observed(&cloud), once.clone());
            prop_assert_eq!(shape_complete_mesh(&once, &cloud).unwrap(), shape_complete_mesh(&g, &cloud).unwrap());
        }

        /// Rendered points re-voxelized in a frame that holds the mesh land in
        /// the mesh's occupied cells dilated by one voxel.
        #[test]
        fn rendered_points_stay_in_dilated_occupancy(seed in 0u64..10_000) {
            let g = random_grid(seed, 6, 0.35);
            let Ok(m) = marching_cubes(&g, 0.5) else { return Ok(()) };
            let f = g.frame();
            let c = m.centroid();
            let cam = Camera::new(c + Vec3::new(1.5, 0.7, 0.4), c, 0.9, 24, 24).unwrap();
            let Ok(cloud) = depth_render(&m, &cam) else { return Ok(()) };
            // The padded lattice reaches half a cell past the frame.
            let padded = GridFrame::new(
                [f.dims[0] + 2, f.dims[1] + 2, f.dims[2] + 2],
                f.origin - Vec3::repeat(f.resolution),
                f.resolution,
            ).unwrap();
            let occ = VoxelGrid::from_fn(padded, |p| m.contains(p));
            for p in cloud.points() {
                let [i, j, k] = padded.cell_of(p).unwrap();
                let near = (-1i64..=1).any(|di| (-1i64..=1).any(|dj| (-1i64..=1).any(|dk| {
                    let (x, y, z) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    let n = padded.dims;
                    x >= 0 && y >= 0 && z >= 0 && (x as usize) < n[0] && (y as usize) < n[1] && (z as usize) < n[2]
                        && occ.get(x as usize, y as usize, z as usize) >= 0.5
                })));
                prop_assert!(near);
            }
        }
    }
}
