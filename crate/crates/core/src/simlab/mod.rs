//! Synthetic objects and views, the ODS-versus-OD experiment, and the
//! paired signed-rank test used to compare them.

mod dataset;
mod experiment;
mod objects;
mod stats;
mod views;

use thiserror::Error;

pub use dataset::{Dataset, DatasetConfig, Manifest, SplitData, MANIFEST};
pub use experiment::{
    mesh_hash, run_experiment, Excluded, ExperimentConfig, ExperimentReport, Method, MethodSummary, MetricSummary,
    ReportRow, Selection, SplitSummary, TestOutcome, TestSummary,
};
pub use objects::{
    gen_objects, object_frame, random_object, ObjectSpec, Part, Pose, Primitive, ShapeKind, SimObject, Split,
    SplitCounts,
};
pub use stats::{
    exact_p, normal_p, signed_ranks, wilcoxon_signed_rank, Alternative, WilcoxonResult, EXACT_MAX_N, MIN_PAIRS,
};
pub use views::{make_partial_views, training_pair, CameraConfig, View};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("need at least 5 non-zero paired differences, got {0}")]
    TooFewPairs(usize),
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[cfg(test)]
mod tests;
