use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{SimError, SimObject};
use crate::meshing::{depth_render, Camera};
use crate::voxelgrid::{voxelize, PointCloud, VoxelGrid};
use crate::{rng, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Camera distance from the object center, in object radii.
    pub distance: f64,
    /// Extra margin on the field of view around the object's silhouette.
    pub margin: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { width: 40, height: 40, distance: 4.0, margin: 1.15 }
    }
}

impl CameraConfig {
    /// Camera at `dir` (unit, from the object outward) looking at the object.
    pub fn camera_for(&self, object: &SimObject, dir: &Vec3) -> Result<Camera, SimError> {
        let center = object.center();
        let radius = object.radius();
        let d = self.distance * radius;
        let fov = 2.0 * (self.margin * radius / d).min(0.99).asin();
        Camera::new(center + dir * d, center, fov, self.width, self.height)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

/// One rendered partial observation of an object.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: String,
    /// Index into the object list the view was rendered from.
    pub object: usize,
    pub camera: Camera,
    pub cloud: PointCloud,
}

fn unit(r: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// `per_object` views of each object from cameras placed uniformly on a
/// sphere around it. The camera for view `k` of object `i` comes from the
/// stream `(seed, tag, i * per_object + k)`. Views that see nothing are
/// skipped with a warning.
pub fn make_partial_views(
    objects: &[SimObject],
    per_object: usize,
    camera: &CameraConfig,
    seed: u64,
    tag: &str,
) -> Result<Vec<View>, SimError> {
    if objects.is_empty() {
        return Err(SimError::InvalidConfig("no objects to render".into()));
    }
    let mut views = Vec::with_capacity(objects.len() * per_object);
    for (i, obj) in objects.iter().enumerate() {
        for k in 0..per_object {
            let index = (i * per_object + k) as u64;
            let dir = unit(&mut rng::stream(seed, tag, index));
            let cam = camera.camera_for(obj, &dir)?;
            match depth_render(&obj.mesh, &cam) {
                Ok(cloud) => views.push(View { id: format!("{}-v{k}", obj.id), object: i, camera: cam, cloud }),
                Err(e) => log::warn!("skipping view {k} of {}: {e}", obj.id),
            }
        }
    }
    Ok(views)
}

/// Network input for a view and the ground-truth occupancy in the same frame.
pub fn training_pair(
    object: &SimObject,
    cloud: &PointCloud,
    dims: usize,
    padding: f64,
) -> Result<(VoxelGrid, VoxelGrid), SimError> {
    let input = voxelize(cloud, [dims; 3], padding).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let target = object.spec.occupancy(*input.frame());
    Ok((input, target))
}
