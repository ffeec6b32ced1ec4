use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_grasp, plan_candidates, rank_grasps, EvalConfig, GraspScoreTable, Metric, PlanError, RankedGrasp};
use crate::dropoutnet::{forward, mc_samples, NetworkParams};
use crate::meshing::{shape_complete_mesh, TriMesh};
use crate::voxelgrid::{jaccard, mean_grid, threshold, voxelize, PointCloud, VoxelGrid};
use crate::{rng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    /// Candidate grasps drawn on the mean shape.
    pub candidates: usize,
    /// Frame padding around the observed cloud, as a fraction of its
    /// longest extent.
    pub padding: f64,
    pub metric: Metric,
    pub eval: EvalConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { candidates: 600, padding: 0.25, metric: Metric::Epsilon, eval: EvalConfig::default() }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.candidates == 0 {
            return Err(PlanError::InvalidConfig("candidates must be >= 1".into()));
        }
        if !(self.padding.is_finite() && self.padding >= 0.0) {
            return Err(PlanError::InvalidConfig("padding must be >= 0".into()));
        }
        if !(self.eval.mu.is_finite() && self.eval.mu >= 0.0) {
            return Err(PlanError::InvalidConfig("mu must be >= 0".into()));
        }
        self.eval.gripper.validate()
    }
}

/// How shape samples are drawn from the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Fresh dropout mask per sample.
    Dropout,
    /// Dropout disabled; every sample is the point estimate.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub samples: usize,
    pub candidates_requested: usize,
    pub candidates_kept: usize,
    /// Jaccard of each thresholded sample against the thresholded mean.
    pub jaccard_to_mean: Vec<f64>,
    pub mean_occupied_voxels: usize,
    pub observed_points: usize,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub ranking: Vec<RankedGrasp>,
    pub table: GraspScoreTable,
    pub diagnostics: PlanDiagnostics,
    /// Observed-voxel-clamped mean of the samples.
    pub mean_grid: VoxelGrid,
    pub mean_mesh: TriMesh,
    pub sample_meshes: Vec<TriMesh>,
}

impl PlanResult {
    pub fn best(&self) -> &RankedGrasp {
        &self.ranking[0]
    }
}

fn sample_ids(count: usize) -> Vec<String> {
    (0..count).map(|i| format!("sample-{i}")).collect()
}

fn score_table(
    grasps: Vec<super::Grasp>,
    meshes: &[TriMesh],
    eval: &EvalConfig,
) -> GraspScoreTable {
    let cols = meshes.len();
    let flat: Vec<_> = (0..grasps.len() * cols)
        .into_par_iter()
        .map(|k| evaluate_grasp(&grasps[k / cols], &meshes[k % cols], eval))
        .collect();
    let qualities = flat.chunks(cols).map(|c| c.to_vec()).collect();
    GraspScoreTable { grasps, qualities, sample_ids: sample_ids(cols) }
}

/// Plan on the mean of `samples` completed shapes and rank every candidate
/// by its mean quality across the individual samples.
pub fn robust_plan(
    cloud: &PointCloud,
    params: &NetworkParams,
    samples: usize,
    mode: SampleMode,
    config: &PlanConfig,
    seed: u64,
) -> Result<PlanResult> {
    config.validate()?;
    if samples == 0 {
        return Err(PlanError::InvalidConfig("at least one sample is required".into()).into());
    }
    let input = voxelize(cloud, params.spec.input_dims, config.padding)?;
    let grids = match mode {
        SampleMode::Dropout => mc_samples(params, &input, samples, seed)?,
        SampleMode::Deterministic => {
            let g = forward(params, &input, None)?;
            vec![g; samples]
        }
    };
    let sample_meshes = grids
        .par_iter()
        .map(|g| shape_complete_mesh(g, cloud))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = mean_grid(&grids)?.with_observed(cloud);
    let mean_mesh = shape_complete_mesh(&mean, cloud)?;
    let grasps = plan_candidates(&mean_mesh, config.candidates, &config.eval.gripper, &mut rng::stream(seed, "plan", 0))?;
    let table = score_table(grasps, &sample_meshes, &config.eval);
    let ranking = rank_grasps(&table, config.metric)?;
    let mean_bin = threshold(&mean, 0.5);
    let jaccard_to_mean = grids
        .iter()
        .map(|g| jaccard(&threshold(&g.with_observed(cloud), 0.5), &mean_bin))
        .collect::<Result<Vec<_>, _>>()?;
    let diagnostics = PlanDiagnostics {
        samples,
        candidates_requested: config.candidates,
        candidates_kept: table.grasps.len(),
        jaccard_to_mean,
        mean_occupied_voxels: mean_bin.occupied_count(),
        observed_points: cloud.len(),
    };
    Ok(PlanResult { ranking, table, diagnostics, mean_grid: mean, mean_mesh, sample_meshes })
}

/// Point-estimate planning: one deterministic completion, candidates planned
/// and scored on that single shape.
pub fn point_estimate_plan(
    cloud: &PointCloud,
    params: &NetworkParams,
    config: &PlanConfig,
    seed: u64,
) -> Result<PlanResult> {
    config.validate()?;
    let input = voxelize(cloud, params.spec.input_dims, config.padding)?;
    let completed = forward(params, &input, None)?.with_observed(cloud);
    let mesh = shape_complete_mesh(&completed, cloud)?;
    let grasps = plan_candidates(&mesh, config.candidates, &config.eval.gripper, &mut rng::stream(seed, "plan", 0))?;
    let qualities: Vec<Vec<_>> =
        grasps.par_iter().map(|g| vec![evaluate_grasp(g, &mesh, &config.eval)]).collect();
    let table = GraspScoreTable { grasps, qualities, sample_ids: sample_ids(1) };
    let ranking = rank_grasps(&table, config.metric)?;
    let diagnostics = PlanDiagnostics {
        samples: 1,
        candidates_requested: config.candidates,
        candidates_kept: table.grasps.len(),
        jaccard_to_mean: vec![1.0],
        mean_occupied_voxels: threshold(&completed, 0.5).occupied_count(),
        observed_points: cloud.len(),
    };
    Ok(PlanResult { ranking, table, diagnostics, mean_grid: completed, mean_mesh: mesh.clone(), sample_meshes: vec![mesh] })
}

/// Self-describing record of one planning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub format: String,
    pub version: u32,
    /// SHA-256 of the observed points (little-endian f64 triples).
    pub input_hash: String,
    pub network_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub mode: SampleMode,
    /// One deterministic sample: the plan is the point-estimate baseline.
    pub point_estimate: bool,
    pub config: PlanConfig,
    pub diagnostics: PlanDiagnostics,
    pub ranking: Vec<RankedGrasp>,
    pub table: GraspScoreTable,
}

pub fn cloud_hash(cloud: &PointCloud) -> String {
    let mut h = Sha256::new();
    for p in cloud.points() {
        for c in p.iter() {
            h.update(c.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn params_hash(params: &NetworkParams) -> String {
    let json = serde_json::to_vec(params).expect("parameters serialize");
    hex::encode(Sha256::digest(json))
}

impl RunArtifact {
    pub fn new(
        cloud: &PointCloud,
        params: &NetworkParams,
        seed: u64,
        mode: SampleMode,
        config: &PlanConfig,
        result: &PlanResult,
    ) -> Self {
        Self {
            format: "ugrasp-plan".into(),
            version: 1,
            input_hash: cloud_hash(cloud),
            network_hash: params_hash(params),
            seed,
            samples: result.diagnostics.samples,
            mode,
            point_estimate: result.diagnostics.samples == 1 && mode == SampleMode::Deterministic,
            config: *config,
            diagnostics: result.diagnostics.clone(),
            ranking: result.ranking.clone(),
            table: result.table.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes") + "\n"
    }
}
