//! Grasp candidates, grasp scoring and the ranking of candidates by their
//! mean quality over sampled shapes.

mod gripper;
mod pipeline;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gripper::{evaluate_grasp, grasp_contacts, EvalConfig, GripperConfig};
pub use pipeline::{
    cloud_hash, params_hash, point_estimate_plan, robust_plan, PlanConfig, PlanDiagnostics, PlanResult,
    RunArtifact, SampleMode,
};

use crate::meshing::{ray_intersect, TriMesh};
use crate::voxelgrid::exact_order_mean;
use crate::wrench::GraspQuality;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no grasp candidate reaches the mesh with both jaws")]
    DegenerateMesh,
    #[error("score table is empty")]
    EmptyTable,
    #[error("score table rows have {0} entries, expected {1}")]
    RaggedTable(usize, usize),
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

/// Parallel-jaw grasp: the hand travels along `approach_dir` toward
/// `approach_point` and closes its jaws along `jaw_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub approach_point: Vec3,
    pub approach_dir: Vec3,
    pub jaw_axis: Vec3,
    pub max_opening: f64,
    pub standoff: f64,
}

impl Grasp {
    pub fn is_valid(&self) -> bool {
        (self.approach_dir.norm() - 1.0).abs() <= 1e-9
            && (self.jaw_axis.norm() - 1.0).abs() <= 1e-9
            && self.approach_dir.dot(&self.jaw_axis).abs() <= 1e-9
            && self.max_opening > 0.0
            && self.standoff >= 0.0
    }
}

fn unit_vector(r: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Up to `n` grasps with approach directions drawn uniformly on the sphere
/// around the mesh centroid and jaw axes drawn uniformly in the plane
/// across each approach. Every draw consumes the same amount of randomness,
/// so the list depends only on the mesh and the stream. Candidates whose
/// jaws do not both touch the mesh are dropped.
pub fn plan_candidates(
    mesh: &TriMesh,
    n: usize,
    gripper: &GripperConfig,
    r: &mut impl Rng,
) -> Result<Vec<Grasp>, PlanError> {
    gripper.validate()?;
    if mesh.is_empty() {
        return Err(PlanError::DegenerateMesh);
    }
    let center = mesh.centroid();
    let radius = mesh.radius_about(&center);
    let standoff = gripper.standoff_scale * radius;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let dir = -unit_vector(r);
        let angle = r.gen_range(0.0..std::f64::consts::TAU);
        let origin = center - dir * (2.0 * radius + standoff);
        let Some(hit) = ray_intersect(mesh, &origin, &dir) else { continue };
        let t1 = {
            let a = if dir.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            dir.cross(&a).normalize()
        };
        let t2 = dir.cross(&t1);
        let jaw_axis = (t1 * angle.cos() + t2 * angle.sin()).normalize();
        let g = Grasp {
            approach_point: hit.point,
            approach_dir: dir,
            jaw_axis,
            max_opening: gripper.max_opening,
            standoff,
        };
        if grasp_contacts(&g, mesh, gripper, 0.0).is_some() {
            out.push(g);
        }
    }
    if out.is_empty() {
        return Err(PlanError::DegenerateMesh);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Epsilon,
    V,
}

impl Metric {
    pub fn of(self, q: &GraspQuality) -> f64 {
        match self {
            Metric::Epsilon => q.epsilon,
            Metric::V => q.v,
        }
    }

    pub fn other(self) -> Metric {
        match self {
            Metric::Epsilon => Metric::V,
            Metric::V => Metric::Epsilon,
        }
    }
}

/// Quality of every candidate (rows) on every sampled shape (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspScoreTable {
    pub grasps: Vec<Grasp>,
    pub qualities: Vec<Vec<GraspQuality>>,
    pub sample_ids: Vec<String>,
}

impl GraspScoreTable {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.grasps.is_empty() || self.sample_ids.is_empty() {
            return Err(PlanError::EmptyTable);
        }
        if self.qualities.len() != self.grasps.len() {
            return Err(PlanError::RaggedTable(self.qualities.len(), self.grasps.len()));
        }
        if let Some(row) = self.qualities.iter().find(|r| r.len() != self.sample_ids.len()) {
            return Err(PlanError::RaggedTable(row.len(), self.sample_ids.len()));
        }
        Ok(())
    }

    /// Mean of `metric` over a row; independent of column order.
    pub fn row_mean(&self, row: usize, metric: Metric) -> f64 {
        let mut xs: Vec<f64> = self.qualities[row].iter().map(|q| metric.of(q)).collect();
        exact_order_mean(&mut xs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedGrasp {
    /// Row of the candidate in the score table.
    pub index: usize,
    pub grasp: Grasp,
    pub mean: f64,
    pub secondary_mean: f64,
}

/// Candidates by descending mean of `metric`; ties go to the higher mean of
/// the other metric, then to the lower candidate index.
pub fn rank_grasps(table: &GraspScoreTable, metric: Metric) -> Result<Vec<RankedGrasp>, PlanError> {
    table.validate()?;
    let mut ranked: Vec<RankedGrasp> = (0..table.grasps.len())
        .map(|i| RankedGrasp {
            index: i,
            grasp: table.grasps[i],
            mean: table.row_mean(i, metric),
            secondary_mean: table.row_mean(i, metric.other()),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then(b.secondary_mean.total_cmp(&a.secondary_mean))
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}
