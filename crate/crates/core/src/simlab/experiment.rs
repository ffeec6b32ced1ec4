//! Dropout-sampled planning (ODS) against point-estimate planning (OD),
//! scored on ground-truth meshes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{Dataset, SplitData};
use super::objects::{ShapeKind, Split};
use super::stats::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
use super::SimError;
use crate::dropoutnet::NetworkParams;
use crate::meshing::TriMesh;
use crate::planner::{
    evaluate_grasp, params_hash, point_estimate_plan, rank_grasps, robust_plan, EvalConfig, Grasp, Metric, PlanConfig,
    PlanResult, SampleMode,
};
use crate::voxelgrid::{jaccard, threshold, voxelize, VoxelGrid};
use crate::wrench::{GraspQuality, QualityConfig};
use crate::{rng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Mean quality over dropout samples.
    #[serde(rename = "ODS")]
    Ods,
    /// Single completion without test-time dropout.
    #[serde(rename = "OD")]
    Od,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ods => "ODS",
            Method::Od => "OD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Dropout samples per view for ODS.
    pub samples: usize,
    pub plan: PlanConfig,
    /// Metrics used for top-1 selection.
    pub metrics: Vec<Metric>,
    /// Scoring of the selected grasps on the ground-truth mesh.
    pub ground_truth: EvalConfig,
    /// How far behind the planned approach point the hand starts when a
    /// grasp is executed on the ground-truth object, meters.
    pub gt_standoff: f64,
    pub splits: Vec<Split>,
    /// Overrides the network's dropout rate for both methods.
    pub dropout_rate: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            plan: PlanConfig::default(),
            metrics: vec![Metric::Epsilon],
            ground_truth: EvalConfig { quality: QualityConfig::default(), ..EvalConfig::default() },
            gt_standoff: 0.2,
            splits: vec![Split::HoldoutViews, Split::HoldoutModels],
            dropout_rate: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.samples == 0 {
            return bad("samples must be >= 1");
        }
        if self.metrics.is_empty() {
            return bad("at least one selection metric is required");
        }
        if self.metrics.contains(&Metric::V) && self.plan.eval.quality.volume_directions == 0 {
            return bad("selecting by v needs plan.eval.quality.volume_directions > 0");
        }
        if self.splits.is_empty() {
            return bad("no splits selected");
        }
        if !(self.gt_standoff.is_finite() && self.gt_standoff > 0.0) {
            return bad("gt_standoff must be > 0");
        }
        if let Some(p) = self.dropout_rate {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout_rate must be in [0, 1)");
            }
        }
        self.plan.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

/// Top-1 grasp of one method under one metric, rescored on ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub metric: Metric,
    pub grasp: Grasp,
    /// The selection score on the method's own shape estimate(s).
    pub planned_score: f64,
    pub ground_truth: GraspQuality,
    /// Hash of the mesh the ground-truth score was computed on.
    pub scored_on: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub split: Split,
    pub view: String,
    pub object: String,
    pub kind: ShapeKind,
    pub method: Method,
    /// Jaccard of the method's thresholded completion against ground truth.
    pub jaccard: f64,
    /// Jaccard of the partial input itself, the copy-input baseline.
    pub jaccard_input: f64,
    pub candidates: usize,
    pub selections: Vec<Selection>,
}

impl ReportRow {
    pub fn selection(&self, metric: Metric) -> Option<&Selection> {
        self.selections.iter().find(|s| s.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub split: Split,
    pub view: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean_gt_epsilon: f64,
    pub mean_gt_v: f64,
    pub force_closure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_jaccard: f64,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    Ok(WilcoxonResult),
    TooFewPairs { nonzero: usize },
}

/// One-sided signed-rank test of OD < ODS on the ground-truth value of the
/// selection metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub metric: Metric,
    pub pairs: usize,
    pub outcome: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub views: usize,
    pub excluded: usize,
    pub mean_jaccard_input: f64,
    pub methods: Vec<MethodSummary>,
    pub tests: Vec<TestSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub dataset_seed: u64,
    pub network_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub excluded: Vec<Excluded>,
    pub splits: Vec<SplitSummary>,
}

pub fn mesh_hash(mesh: &TriMesh) -> String {
    let mut h = Sha256::new();
    for v in mesh.vertices() {
        for c in v.iter() {
            h.update(c.to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        for i in t {
            h.update(i.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn ground_truth_value(q: &GraspQuality, metric: Metric) -> f64 {
    metric.of(q)
}

/// Both methods on one view, or the reason the view is unusable.
fn run_view(
    data: &SplitData,
    index: usize,
    params: &NetworkParams,
    config: &ExperimentConfig,
    seed: u64,
) -> std::result::Result<[ReportRow; 2], String> {
    let view = &data.views[index];
    let object = data.object_of(view);
    let view_seed = rng::derive_seed(seed, data.split.name(), index as u64);
    let ods = robust_plan(&view.cloud, params, config.samples, SampleMode::Dropout, &config.plan, view_seed)
        .map_err(|e| format!("ODS: {e}"))?;
    let od = point_estimate_plan(&view.cloud, params, &config.plan, view_seed).map_err(|e| format!("OD: {e}"))?;
    let input = voxelize(&view.cloud, params.spec.input_dims, config.plan.padding).map_err(|e| e.to_string())?;
    let truth = object.spec.occupancy(*input.frame());
    let jaccard_input = jaccard(&input, &truth).map_err(|e| e.to_string())?;
    let gt_hash = mesh_hash(&object.mesh);
    let row = |method: Method, result: &PlanResult| -> std::result::Result<ReportRow, String> {
        let completed: &VoxelGrid = &result.mean_grid;
        let j = jaccard(&threshold(completed, 0.5), &truth).map_err(|e| e.to_string())?;
        let mut selections = Vec::with_capacity(config.metrics.len());
        for &metric in &config.metrics {
            let ranked = rank_grasps(&result.table, metric).map_err(|e| e.to_string())?;
            let top = ranked[0];
            let executed = Grasp { standoff: config.gt_standoff, ..top.grasp };
            selections.push(Selection {
                metric,
                grasp: top.grasp,
                planned_score: top.mean,
                ground_truth: evaluate_grasp(&executed, &object.mesh, &config.ground_truth),
                scored_on: gt_hash.clone(),
            });
        }
        Ok(ReportRow {
            split: data.split,
            view: view.id.clone(),
            object: object.id.clone(),
            kind: object.spec.kind(),
            method,
            jaccard: j,
            jaccard_input,
            candidates: result.table.grasps.len(),
            selections,
        })
    };
    Ok([row(Method::Ods, &ods)?, row(Method::Od, &od)?])
}

fn summarize(split: Split, rows: &[ReportRow], excluded: usize, config: &ExperimentConfig) -> SplitSummary {
    let of = |m: Method| rows.iter().filter(move |r| r.split == split && r.method == m);
    let methods = [Method::Ods, Method::Od]
        .into_iter()
        .map(|m| MethodSummary {
            method: m,
            mean_jaccard: mean(of(m).map(|r| r.jaccard)),
            metrics: config
                .metrics
                .iter()
                .map(|&metric| {
                    let sel = || of(m).filter_map(move |r| r.selection(metric));
                    MetricSummary {
                        metric,
                        mean_gt_epsilon: mean(sel().map(|s| s.ground_truth.epsilon)),
                        mean_gt_v: mean(sel().map(|s| s.ground_truth.v)),
                        force_closure_rate: mean(sel().map(|s| if s.ground_truth.force_closure { 1.0 } else { 0.0 })),
                    }
                })
                .collect(),
        })
        .collect();
    let tests = config
        .metrics
        .iter()
        .map(|&metric| {
            let value = |m: Method| -> Vec<f64> {
                of(m).map(|r| ground_truth_value(&r.selection(metric).expect("selection").ground_truth, metric)).collect()
            };
            let pairs: Vec<(f64, f64)> = value(Method::Od).into_iter().zip(value(Method::Ods)).collect();
            let outcome = match wilcoxon_signed_rank(&pairs, Alternative::Less) {
                Ok(w) => TestOutcome::Ok(w),
                Err(SimError::TooFewPairs(n)) => TestOutcome::TooFewPairs { nonzero: n },
                Err(e) => unreachable!("ground-truth scores are finite: {e}"),
            };
            TestSummary { metric, pairs: pairs.len(), outcome }
        })
        .collect();
    SplitSummary {
        split,
        views: of(Method::Ods).count(),
        excluded,
        mean_jaccard_input: mean(of(Method::Ods).map(|r| r.jaccard_input)),
        methods,
        tests,
    }
}

/// Run both methods on every view of the configured splits. Views are
/// independent and run in parallel; results are gathered in view order.
/// A view that fails for either method is dropped for both.
pub fn run_experiment(
    dataset: &Dataset,
    params: &NetworkParams,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    config.validate()?;
    let params = match config.dropout_rate {
        Some(p) => params.with_dropout_rate(p)?,
        None => params.clone(),
    };
    if params.spec.input_dims != [dataset.config.grid; 3] {
        return Err(SimError::InvalidConfig(format!(
            "network expects {:?} grids, dataset has {}^3",
            params.spec.input_dims, dataset.config.grid
        ))
        .into());
    }
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut splits = Vec::new();
    for &split in &config.splits {
        let data = dataset.split(split);
        let outcomes: Vec<_> =
            (0..data.views.len()).into_par_iter().map(|i| run_view(data, i, &params, config, seed)).collect();
        let before = excluded.len();
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(pair) => rows.extend(pair),
                Err(reason) => {
                    log::warn!("excluding view {}: {reason}", data.views[i].id);
                    excluded.push(Excluded { split, view: data.views[i].id.clone(), reason });
                }
            }
        }
        splits.push(summarize(split, &rows, excluded.len() - before, config));
    }
    Ok(ExperimentReport {
        format: "ugrasp-experiment".into(),
        version: 1,
        seed,
        dataset_seed: dataset.seed,
        network_hash: params_hash(&params),
        config: config.clone(),
        rows,
        excluded,
        splits,
    })
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn summary(&self, split: Split) -> Option<&SplitSummary> {
        self.splits.iter().find(|s| s.split == split)
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}  dataset seed {}  network {}", self.seed, self.dataset_seed, &self.network_hash[..12]);
        let _ = writeln!(
            out,
            "{:<15} {:<7} {:<6} {:>5} {:>9} {:>11} {:>11} {:>7}",
            "split", "metric", "method", "views", "jaccard", "gt eps", "gt v", "fc"
        );
        for s in &self.splits {
            for (k, &metric) in self.config.metrics.iter().enumerate() {
                for m in &s.methods {
                    let ms = &m.metrics[k];
                    let _ = writeln!(
                        out,
                        "{:<15} {:<7} {:<6} {:>5} {:>9.4} {:>11.6} {:>11.4e} {:>6.1}%",
                        s.split.name(),
                        metric_name(metric),
                        m.method.name(),
                        s.views,
                        m.mean_jaccard,
                        ms.mean_gt_epsilon,
                        ms.mean_gt_v,
                        100.0 * ms.force_closure_rate
                    );
                }
            }
            let _ = writeln!(out, "{:<15} input  {:>22.4}", s.split.name(), s.mean_jaccard_input);
            for t in &s.tests {
                let result = match &t.outcome {
                    TestOutcome::Ok(w) => format!(
                        "T={} p={:.6} n={} ({})",
                        w.t,
                        w.p,
                        w.n,
                        if w.exact { "exact" } else { "normal approx." }
                    ),
                    TestOutcome::TooFewPairs { nonzero } => format!("too few non-zero pairs ({nonzero})"),
                };
                let _ = writeln!(out, "{:<15} {:<7} OD < ODS: {result}", s.split.name(), metric_name(t.metric));
            }
            if s.excluded > 0 {
                let _ = writeln!(out, "{:<15} {} view(s) excluded", s.split.name(), s.excluded);
            }
        }
        out
    }

    /// One line per (view, method, metric), for plotting per-object scores.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,view,object,kind,method,metric,gt_epsilon,gt_v,force_closure,planned_score,jaccard,jaccard_input\n");
        for r in &self.rows {
            for s in &r.selections {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{:e},{:e},{},{:e},{:e},{:e}",
                    r.split.name(),
                    r.view,
                    r.object,
                    kind_name(r.kind),
                    r.method.name(),
                    metric_name(s.metric),
                    s.ground_truth.epsilon,
                    s.ground_truth.v,
                    u8::from(s.ground_truth.force_closure),
                    s.planned_score,
                    r.jaccard,
                    r.jaccard_input
                );
            }
        }
        out
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Epsilon => "epsilon",
        Metric::V => "v",
    }
}

fn kind_name(k: ShapeKind) -> &'static str {
    match k {
        ShapeKind::Box => "box",
        ShapeKind::Cylinder => "cylinder",
        ShapeKind::Sphere => "sphere",
        ShapeKind::Capsule => "capsule",
        ShapeKind::Composite => "composite",
    }
}
