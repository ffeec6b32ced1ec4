//! Generated datasets and their on-disk layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/objects/<split>/<object-id>.off   ground-truth mesh
//! <dir>/objects/<split>/<object-id>.vgb   ground-truth occupancy
//! <dir>/views/<split>/<view-id>.xyz       rendered partial cloud
//! ```
//!
//! The manifest holds the seed, the generation config, every object spec
//! and every camera; paths in it are relative to `<dir>`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objects::{gen_objects, ObjectSpec, SimObject, Split, SplitCounts};
use super::views::{make_partial_views, training_pair, CameraConfig, View};
use super::SimError;
use crate::meshing::{io::write_mesh, io::read_mesh, Camera};
use crate::voxelgrid::{read_cloud, read_grid, write_cloud, write_grid_binary, VoxelGrid};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Cells per axis of every grid.
    pub grid: usize,
    /// Voxelization padding around each partial cloud.
    pub padding: f64,
    pub counts: SplitCounts,
    /// Views rendered per training object.
    pub training_views: usize,
    /// Views rendered per object in each holdout split.
    pub test_views: usize,
    pub camera: CameraConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            grid: 16,
            padding: 0.25,
            counts: SplitCounts::default(),
            training_views: 8,
            test_views: 1,
            camera: CameraConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.grid < 4 || self.grid % 4 != 0 {
            return Err(SimError::InvalidConfig(format!("grid must be a positive multiple of 4, got {}", self.grid)));
        }
        if !(self.padding.is_finite() && self.padding >= 0.0) {
            return Err(SimError::InvalidConfig("padding must be >= 0".into()));
        }
        if self.training_views == 0 || self.test_views == 0 {
            return Err(SimError::InvalidConfig("need at least one view per object".into()));
        }
        if !(self.camera.distance > 1.0 && self.camera.margin > 0.0) {
            return Err(SimError::InvalidConfig("camera must sit outside the object".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub split: Split,
    pub objects: Vec<SimObject>,
    pub views: Vec<View>,
}

impl SplitData {
    pub fn object_of(&self, view: &View) -> &SimObject {
        &self.objects[view.object]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub config: DatasetConfig,
    /// Training, holdout views, holdout models, in that order.
    pub splits: Vec<SplitData>,
}

impl Dataset {
    pub fn generate(config: &DatasetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (training, holdout_views, holdout_models) = gen_objects(seed, &config.counts, config.grid)?;
        let mut splits = Vec::with_capacity(3);
        for (split, objects) in [
            (Split::Training, training),
            (Split::HoldoutViews, holdout_views),
            (Split::HoldoutModels, holdout_models),
        ] {
            let per_object = if split == Split::Training { config.training_views } else { config.test_views };
            let tag = format!("camera-{}", split.name());
            let views = make_partial_views(&objects, per_object, &config.camera, seed, &tag)?;
            splits.push(SplitData { split, objects, views });
        }
        Ok(Self { seed, config: config.clone(), splits })
    }

    pub fn split(&self, split: Split) -> &SplitData {
        self.splits.iter().find(|s| s.split == split).expect("all splits present")
    }

    /// (partial input, ground-truth occupancy) for every training view.
    pub fn training_pairs(&self) -> Result<Vec<(VoxelGrid, VoxelGrid)>> {
        let train = self.split(Split::Training);
        let pairs = train
            .views
            .par_iter()
            .map(|v| training_pair(train.object_of(v), &v.cloud, self.config.grid, self.config.padding))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(pairs)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        let mut manifest =
            Manifest { format: "ugrasp-dataset".into(), version: 1, seed: self.seed, config: self.config.clone(), splits: vec![] };
        for s in &self.splits {
            let odir = PathBuf::from("objects").join(s.split.name());
            let vdir = PathBuf::from("views").join(s.split.name());
            for d in [&odir, &vdir] {
                std::fs::create_dir_all(dir.join(d)).map_err(|e| Error::io(dir.join(d), e))?;
            }
            let mut objects = Vec::with_capacity(s.objects.len());
            for o in &s.objects {
                let mesh = odir.join(format!("{}.off", o.id));
                let grid = odir.join(format!("{}.vgb", o.id));
                write_mesh(dir.join(&mesh), &o.mesh)?;
                write_grid_binary(dir.join(&grid), &o.grid)?;
                objects.push(ManifestObject { id: o.id.clone(), spec: o.spec.clone(), mesh: path_str(&mesh), grid: path_str(&grid) });
            }
            let mut views = Vec::with_capacity(s.views.len());
            for v in &s.views {
                let cloud = vdir.join(format!("{}.xyz", v.id));
                write_cloud(dir.join(&cloud), &v.cloud)?;
                views.push(ManifestView {
                    id: v.id.clone(),
                    object: v.object,
                    camera: v.camera,
                    cloud: path_str(&cloud),
                    points: v.cloud.len(),
                });
            }
            manifest.splits.push(ManifestSplit { split: s.split, objects, views });
        }
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format != "ugrasp-dataset" || manifest.version != 1 {
            return Err(Error::format(&path, "not a version 1 dataset manifest"));
        }
        let mut splits = Vec::with_capacity(3);
        for want in Split::ALL {
            let s = manifest
                .splits
                .iter()
                .find(|s| s.split == want)
                .ok_or_else(|| Error::format(&path, format!("split {want} missing")))?;
            let mut objects = Vec::with_capacity(s.objects.len());
            for o in &s.objects {
                o.spec.validate().map_err(|e| Error::format(&path, format!("object {}: {e}", o.id)))?;
                objects.push(SimObject {
                    id: o.id.clone(),
                    split: want,
                    spec: o.spec.clone(),
                    mesh: read_mesh(dir.join(&o.mesh))?,
                    grid: read_grid(dir.join(&o.grid))?,
                });
            }
            let mut views = Vec::with_capacity(s.views.len());
            for v in &s.views {
                let cpath = dir.join(&v.cloud);
                let cloud = read_cloud(&cpath)?;
                if cloud.len() != v.points || cloud.is_empty() {
                    return Err(Error::format(&cpath, format!("expected {} points, found {}", v.points, cloud.len())));
                }
                if v.object >= objects.len() {
                    return Err(Error::format(&path, format!("view {} names missing object {}", v.id, v.object)));
                }
                views.push(View { id: v.id.clone(), object: v.object, camera: v.camera, cloud });
            }
            splits.push(SplitData { split: want, objects, views });
        }
        Ok(Self { seed: manifest.seed, config: manifest.config, splits })
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: DatasetConfig,
    pub splits: Vec<ManifestSplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSplit {
    pub split: Split,
    pub objects: Vec<ManifestObject>,
    pub views: Vec<ManifestView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    pub spec: ObjectSpec,
    pub mesh: String,
    pub grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub id: String,
    pub object: usize,
    pub camera: Camera,
    pub cloud: String,
    pub points: usize,
}
