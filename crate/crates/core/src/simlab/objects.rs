//! Synthetic objects: primitive shapes and small composites, each with an
//! exact membership test and a closed triangle mesh.

use std::f64::consts::{PI, TAU};

use nalgebra::Rotation3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::meshing::{box_mesh, uv_sphere, TriMesh};
use crate::voxelgrid::{GridFrame, VoxelGrid};
use crate::{rng, Vec3};

const SEGMENTS: usize = 32;
const RINGS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box { half_extents: [f64; 3] },
    /// Axis along local z.
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
    /// Segment from -half_length to +half_length on local z, swept by `radius`.
    Capsule { radius: f64, half_length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Box,
    Cylinder,
    Sphere,
    Capsule,
    Composite,
}

impl Primitive {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Primitive::Box { .. } => ShapeKind::Box,
            Primitive::Cylinder { .. } => ShapeKind::Cylinder,
            Primitive::Sphere { .. } => ShapeKind::Sphere,
            Primitive::Capsule { .. } => ShapeKind::Capsule,
        }
    }

    fn dimensions(&self) -> Vec<f64> {
        match *self {
            Primitive::Box { half_extents } => half_extents.to_vec(),
            Primitive::Cylinder { radius, half_height } => vec![radius, half_height],
            Primitive::Sphere { radius } => vec![radius],
            Primitive::Capsule { radius, half_length } => vec![radius, half_length],
        }
    }

    /// Membership in the primitive's local frame.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        match *self {
            Primitive::Box { half_extents: h } => p.x.abs() <= h[0] && p.y.abs() <= h[1] && p.z.abs() <= h[2],
            Primitive::Cylinder { radius, half_height } => {
                p.x * p.x + p.y * p.y <= radius * radius && p.z.abs() <= half_height
            }
            Primitive::Sphere { radius } => p.norm_squared() <= radius * radius,
            Primitive::Capsule { radius, half_length } => {
                let z = p.z.clamp(-half_length, half_length);
                (p - Vec3::new(0.0, 0.0, z)).norm_squared() <= radius * radius
            }
        }
    }

    pub fn local_mesh(&self) -> TriMesh {
        match *self {
            Primitive::Box { half_extents: h } => {
                let h = Vec3::from(h);
                box_mesh(-h, h)
            }
            Primitive::Sphere { radius } => uv_sphere(Vec3::zeros(), radius, RINGS, SEGMENTS),
            Primitive::Cylinder { radius, half_height } => revolve(
                &[(0.0, half_height), (radius, half_height), (radius, -half_height), (0.0, -half_height)],
                SEGMENTS,
            ),
            Primitive::Capsule { radius, half_length } => {
                let half = RINGS / 2;
                let mut profile = Vec::with_capacity(RINGS + 2);
                for i in 0..=half {
                    let t = PI * i as f64 / RINGS as f64;
                    profile.push((radius * t.sin(), half_length + radius * t.cos()));
                }
                for i in half..=RINGS {
                    let t = PI * i as f64 / RINGS as f64;
                    profile.push((radius * t.sin(), -half_length + radius * t.cos()));
                }
                profile[0].0 = 0.0;
                profile.last_mut().unwrap().0 = 0.0;
                revolve(&profile, SEGMENTS)
            }
        }
    }
}

/// Closed surface of revolution about z from a top-to-bottom profile of
/// (radius, z) pairs; zero radii become poles.
fn revolve(profile: &[(f64, f64)], segments: usize) -> TriMesh {
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<u32>> = Vec::new();
    for &(rho, z) in profile {
        if rho == 0.0 {
            rings.push(vec![vertices.len() as u32]);
            vertices.push(Vec3::new(0.0, 0.0, z));
        } else {
            let start = vertices.len() as u32;
            for j in 0..segments {
                let a = TAU * j as f64 / segments as f64;
                vertices.push(Vec3::new(rho * a.cos(), rho * a.sin(), z));
            }
            rings.push((start..start + segments as u32).collect());
        }
    }
    let mut triangles = Vec::new();
    for w in rings.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for j in 0..segments {
            let k = (j + 1) % segments;
            match (a.len(), b.len()) {
                (1, 1) => {}
                (1, _) => triangles.push([a[0], b[j], b[k]]),
                (_, 1) => triangles.push([a[j], b[0], a[k]]),
                _ => {
                    triangles.push([a[j], b[j], b[k]]);
                    triangles.push([a[j], b[k], a[k]]);
                }
            }
        }
    }
    TriMesh::new(vertices, triangles).expect("revolved mesh is valid")
}

/// Rigid placement: rotation (axis times angle, radians) then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Pose {
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
}

impl Pose {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_scaled_axis(Vec3::from(self.rotation))
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + Vec3::from(self.translation)
    }

    pub fn inverse_apply(&self, p: &Vec3) -> Vec3 {
        self.rotation().inverse() * (p - Vec3::from(self.translation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub primitive: Primitive,
    pub pose: Pose,
}

/// An object: one primitive, or a union of several, placed in the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub parts: Vec<Part>,
    pub pose: Pose,
}

impl ObjectSpec {
    pub fn single(primitive: Primitive, pose: Pose) -> Self {
        Self { parts: vec![Part { primitive, pose: Pose::default() }], pose }
    }

    pub fn kind(&self) -> ShapeKind {
        match self.parts.as_slice() {
            [p] => p.primitive.kind(),
            _ => ShapeKind::Composite,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.parts.is_empty() {
            return Err(SimError::InvalidObject("composite has no parts".into()));
        }
        for part in &self.parts {
            if part.primitive.dimensions().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(SimError::InvalidObject(format!("non-positive dimension in {:?}", part.primitive)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let q = self.pose.inverse_apply(p);
        self.parts.iter().any(|part| part.primitive.contains_local(&part.pose.inverse_apply(&q)))
    }

    /// World-frame mesh. Composite parts are concatenated; overlapping
    /// pieces stay as separate closed shells, which ray casting handles
    /// because only the first surface along a ray matters.
    pub fn mesh(&self) -> TriMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in &self.parts {
            let m = part.primitive.local_mesh();
            let base = vertices.len() as u32;
            vertices.extend(m.vertices().iter().map(|v| self.pose.apply(&part.pose.apply(v))));
            triangles.extend(m.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        TriMesh::new(vertices, triangles).expect("object mesh is valid")
    }

    /// Occupancy sampled at cell centers.
    pub fn occupancy(&self, frame: GridFrame) -> VoxelGrid {
        VoxelGrid::from_fn(frame, |p| self.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Training,
    HoldoutViews,
    HoldoutModels,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Training, Split::HoldoutViews, Split::HoldoutModels];

    pub fn name(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::HoldoutViews => "holdout-views",
            Split::HoldoutModels => "holdout-models",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn kinds(self) -> &'static [ShapeKind] {
        match self {
            Split::Training | Split::HoldoutViews => &[ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Sphere],
            Split::HoldoutModels => &[ShapeKind::Capsule, ShapeKind::Composite],
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn random_yaw(r: &mut impl Rng) -> Pose {
    Pose { translation: [0.0; 3], rotation: [0.0, 0.0, r.gen_range(0.0..TAU)] }
}

fn random_tilt(r: &mut impl Rng) -> [f64; 3] {
    let a: f64 = r.gen_range(0.0..TAU);
    let t: f64 = r.gen_range(0.0..PI);
    [t * a.cos(), t * a.sin(), 0.0]
}

fn random_primitive(kind: ShapeKind, r: &mut impl Rng) -> Primitive {
    match kind {
        ShapeKind::Box => Primitive::Box {
            half_extents: [r.gen_range(0.02..0.04), r.gen_range(0.02..0.04), r.gen_range(0.02..0.04)],
        },
        ShapeKind::Cylinder => Primitive::Cylinder { radius: r.gen_range(0.02..0.035), half_height: r.gen_range(0.025..0.05) },
        ShapeKind::Sphere => Primitive::Sphere { radius: r.gen_range(0.025..0.04) },
        ShapeKind::Capsule => Primitive::Capsule { radius: r.gen_range(0.015..0.03), half_length: r.gen_range(0.015..0.035) },
        ShapeKind::Composite => unreachable!("composites are assembled from parts"),
    }
}

/// Object of the given kind centered near the origin, with a random
/// orientation. Composites join a box with a smaller second part offset
/// along one of its axes.
pub fn random_object(kind: ShapeKind, r: &mut impl Rng) -> ObjectSpec {
    let tilt = random_tilt(r);
    let pose = Pose { translation: [0.0; 3], rotation: tilt };
    if kind != ShapeKind::Composite {
        return ObjectSpec::single(random_primitive(kind, r), pose);
    }
    let h = [r.gen_range(0.015..0.03), r.gen_range(0.015..0.03), r.gen_range(0.015..0.03)];
    let base = Primitive::Box { half_extents: h };
    let second_kind = [ShapeKind::Sphere, ShapeKind::Cylinder, ShapeKind::Box][r.gen_range(0..3)];
    let second = match random_primitive(second_kind, r) {
        Primitive::Box { half_extents } => Primitive::Box { half_extents: half_extents.map(|v| v * 0.6) },
        Primitive::Cylinder { radius, half_height } => Primitive::Cylinder { radius: radius * 0.6, half_height: half_height * 0.6 },
        Primitive::Sphere { radius } => Primitive::Sphere { radius: radius * 0.6 },
        other => other,
    };
    let axis = r.gen_range(0..3);
    let mut offset = [0.0; 3];
    offset[axis] = h[axis] * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    // Pull the pair back so the union stays centered on the origin.
    let back = offset.map(|v| -v / 2.0);
    ObjectSpec {
        parts: vec![
            Part { primitive: base, pose: Pose { translation: back, rotation: [0.0; 3] } },
            Part {
                primitive: second,
                pose: Pose { translation: [offset[0] + back[0], offset[1] + back[1], offset[2] + back[2]], ..random_yaw(r) },
            },
        ],
        pose,
    }
}

/// A generated object with its ground-truth geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimObject {
    pub id: String,
    pub split: Split,
    pub spec: ObjectSpec,
    pub mesh: TriMesh,
    /// Occupancy in a frame around the mesh's bounding box.
    pub grid: VoxelGrid,
}

impl SimObject {
    pub fn new(id: String, split: Split, spec: ObjectSpec, grid_dims: usize) -> Result<Self, SimError> {
        spec.validate()?;
        let mesh = spec.mesh();
        let frame = object_frame(&mesh, grid_dims)?;
        let grid = spec.occupancy(frame);
        Ok(Self { id, split, spec, mesh, grid })
    }

    pub fn center(&self) -> Vec3 {
        let (lo, hi) = self.mesh.bounds().expect("object meshes are non-empty");
        (lo + hi) / 2.0
    }

    pub fn radius(&self) -> f64 {
        self.mesh.radius_about(&self.center())
    }
}

/// Cubic frame around a mesh's bounding box with 10% padding.
pub fn object_frame(mesh: &TriMesh, dims: usize) -> Result<GridFrame, SimError> {
    let (lo, hi) = mesh.bounds().ok_or(SimError::InvalidObject("empty mesh".into()))?;
    let cloud = crate::voxelgrid::PointCloud::new(vec![lo, hi]).map_err(|e| SimError::InvalidObject(e.to_string()))?;
    GridFrame::around_cloud(&cloud, [dims; 3], crate::voxelgrid::DEFAULT_PADDING)
        .map_err(|e| SimError::InvalidObject(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitCounts {
    pub training: usize,
    pub holdout_views: usize,
    pub holdout_models: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self { training: 48, holdout_views: 30, holdout_models: 30 }
    }
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Training => self.training,
            Split::HoldoutViews => self.holdout_views,
            Split::HoldoutModels => self.holdout_models,
        }
    }
}

/// Objects for the three splits. Training kinds cycle through box,
/// cylinder and sphere; holdout views reuse the training objects in order
/// (they differ only in camera pose); holdout models alternate capsules and
/// composites, kinds never produced for training.
pub fn gen_objects(
    seed: u64,
    counts: &SplitCounts,
    grid_dims: usize,
) -> Result<(Vec<SimObject>, Vec<SimObject>, Vec<SimObject>), SimError> {
    for split in Split::ALL {
        if counts.get(split) == 0 {
            return Err(SimError::InvalidConfig(format!("split {split} needs at least one object")));
        }
    }
    let make = |split: Split, i: usize| {
        let kinds = split.kinds();
        let mut r = rng::stream(seed, split.name(), i as u64);
        let spec = random_object(kinds[i % kinds.len()], &mut r);
        SimObject::new(format!("{}-{i:03}", split.name()), split, spec, grid_dims)
    };
    let training = (0..counts.training).map(|i| make(Split::Training, i)).collect::<Result<Vec<_>, _>>()?;
    let holdout_views = (0..counts.holdout_views)
        .map(|i| {
            let src = &training[i % training.len()];
            SimObject { split: Split::HoldoutViews, ..src.clone() }
        })
        .collect();
    let holdout_models =
        (0..counts.holdout_models).map(|i| make(Split::HoldoutModels, i)).collect::<Result<Vec<_>, _>>()?;
    Ok((training, holdout_views, holdout_models))
}
