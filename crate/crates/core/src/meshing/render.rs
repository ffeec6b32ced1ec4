use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::TriMesh;
use super::{ray_intersect, MeshError};
use crate::voxelgrid::PointCloud;
use crate::Vec3;

/// Pinhole camera. `fov` is the horizontal field of view in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub fov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(position: Vec3, look_at: Vec3, fov: f64, width: usize, height: usize) -> Result<Self, MeshError> {
        let cam = Self { position, look_at, fov, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let finite = self.position.iter().chain(self.look_at.iter()).all(|c| c.is_finite());
        if !finite || (self.look_at - self.position).norm() <= 0.0 {
            return Err(MeshError::InvalidCamera("position must differ from look-at".into()));
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(MeshError::InvalidCamera(format!("fov {} outside (0, pi)", self.fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(MeshError::InvalidCamera("image must be at least 1x1".into()));
        }
        Ok(())
    }

    /// Orthonormal (forward, right, up). Up follows world z unless the view
    /// is nearly vertical, then world y.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = (self.look_at - self.position).normalize();
        let world_up = if f.z.abs() > 0.999 { Vec3::y() } else { Vec3::z() };
        let r = f.cross(&world_up).normalize();
        let u = r.cross(&f);
        (f, r, u)
    }

    /// Unit ray through pixel `(col, row)`. Pixel `i` of `w` sits at
    /// normalized coordinate `-1 + 2i/w`, so doubling the resolution keeps
    /// every previous ray.
    pub fn ray(&self, col: usize, row: usize) -> Vec3 {
        let (f, r, u) = self.basis();
        let tan = (self.fov * 0.5).tan();
        let x = -1.0 + 2.0 * col as f64 / self.width as f64;
        let y = 1.0 - 2.0 * row as f64 / self.height as f64;
        let aspect = self.height as f64 / self.width as f64;
        (f + r * (x * tan) + u * (y * tan * aspect)).normalize()
    }
}

/// First-surface points seen by `camera`, in row-major pixel order.
pub fn depth_render(mesh: &TriMesh, camera: &Camera) -> Result<PointCloud, MeshError> {
    camera.validate()?;
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let points: Vec<Vec3> = (0..camera.height)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..camera.width).filter_map(move |col| {
                ray_intersect(mesh, &camera.position, &camera.ray(col, row)).map(|h| h.point)
            })
        })
        .collect();
    if points.is_empty() {
        return Err(MeshError::NoVisibleSurface);
    }
    Ok(PointCloud::new(points)?)
}
