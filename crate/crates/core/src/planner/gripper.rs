//! Parallel-jaw closing simulation.
//!
//! The hand starts `standoff` behind the planned approach point and moves
//! along the approach direction until its palm touches the mesh (or it
//! reaches the planned point). The jaws then close along the jaw axis at
//! `grasp_depth` beyond the palm. Each jaw is a small square pad sampled by
//! five parallel rays; the jaw stops at its first touching ray and every ray
//! that touches within a small compliance band becomes a contact. A jaw that
//! starts inside the object, or meets nothing within half the opening,
//! makes no contact.

use serde::{Deserialize, Serialize};

use super::{Grasp, PlanError};
use crate::meshing::{ray_intersect, TriMesh};
use crate::wrench::{default_lambda, grasp_quality, wrench_set, Contact, GraspQuality, QualityConfig};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperConfig {
    /// Jaw separation when fully open, meters.
    pub max_opening: f64,
    /// How far past the palm contact the jaws close, meters.
    pub grasp_depth: f64,
    /// Half-width of each square jaw pad, meters.
    pub pad_half_width: f64,
    /// Pad rays landing this close behind the first touch also make contact.
    pub compliance: f64,
    /// Standoff as a fraction of the planning mesh's bounding radius.
    pub standoff_scale: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        Self { max_opening: 0.12, grasp_depth: 0.015, pad_half_width: 0.01, compliance: 0.0025, standoff_scale: 0.5 }
    }
}

impl GripperConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.max_opening > 0.0
            && self.grasp_depth >= 0.0
            && self.pad_half_width >= 0.0
            && self.compliance >= 0.0
            && self.standoff_scale > 0.0
            && [self.max_opening, self.grasp_depth, self.pad_half_width, self.compliance, self.standoff_scale]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidConfig(format!("bad gripper parameters {self:?}")))
        }
    }
}

/// Contact model used when scoring a grasp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub gripper: GripperConfig,
    pub mu: f64,
    pub cone_edges: usize,
    pub quality: QualityConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gripper: GripperConfig::default(),
            mu: 0.5,
            cone_edges: crate::wrench::DEFAULT_CONE_EDGES,
            quality: QualityConfig { volume_directions: 0, ..QualityConfig::default() },
        }
    }
}

/// Where the jaws close on a given mesh.
fn jaw_center(g: &Grasp, mesh: &TriMesh, gripper: &GripperConfig) -> Vec3 {
    let start = g.approach_point - g.approach_dir * g.standoff;
    let travel = match ray_intersect(mesh, &start, &g.approach_dir) {
        Some(h) if mesh.face_normal(h.triangle).dot(&g.approach_dir) < 0.0 => h.distance,
        _ => g.standoff,
    };
    start + g.approach_dir * (travel + gripper.grasp_depth)
}

/// Contacts made by one jaw closing along `close_dir`.
fn jaw_contacts(
    mesh: &TriMesh,
    center: &Vec3,
    close_dir: &Vec3,
    g: &Grasp,
    gripper: &GripperConfig,
    mu: f64,
) -> Vec<Contact> {
    let half = g.max_opening / 2.0;
    let across = g.jaw_axis.cross(&g.approach_dir);
    let h = gripper.pad_half_width;
    let offsets = [(0.0, 0.0), (h, h), (h, -h), (-h, h), (-h, -h)];
    let plate = center - close_dir * half;
    let mut hits = Vec::with_capacity(offsets.len());
    for (a, b) in offsets {
        let origin = plate + g.approach_dir * a + across * b;
        let Some(hit) = ray_intersect(mesh, &origin, close_dir) else { continue };
        // A back face first means this part of the pad starts inside the
        // object: the jaw collides instead of closing on it.
        if mesh.face_normal(hit.triangle).dot(close_dir) >= 0.0 {
            return Vec::new();
        }
        if hit.distance > half {
            continue;
        }
        hits.push(hit);
    }
    let Some(first) = hits.iter().map(|h| h.distance).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    hits.iter()
        .filter(|h| h.distance <= first + gripper.compliance)
        .filter_map(|h| Contact::new(h.point, mesh.interpolated_normal(h.triangle, h.u, h.v), mu).ok())
        .collect()
}

/// Contacts of both jaws, or `None` unless each jaw touches.
pub fn grasp_contacts(g: &Grasp, mesh: &TriMesh, gripper: &GripperConfig, mu: f64) -> Option<Vec<Contact>> {
    if mesh.is_empty() {
        return None;
    }
    let center = jaw_center(g, mesh, gripper);
    let a = jaw_contacts(mesh, &center, &-g.jaw_axis, g, gripper, mu);
    if a.is_empty() {
        return None;
    }
    let b = jaw_contacts(mesh, &center, &g.jaw_axis, g, gripper, mu);
    if b.is_empty() {
        return None;
    }
    Some(a.into_iter().chain(b).collect())
}

/// Close the gripper on `mesh` and score the resulting contacts. Torques
/// are taken about the mesh's bounding-box center.
pub fn evaluate_grasp(g: &Grasp, mesh: &TriMesh, cfg: &EvalConfig) -> GraspQuality {
    let Some(contacts) = grasp_contacts(g, mesh, &cfg.gripper, cfg.mu) else {
        return GraspQuality::NONE;
    };
    let Some((lo, hi)) = mesh.bounds() else {
        return GraspQuality::NONE;
    };
    let origin = (lo + hi) / 2.0;
    let lambda = default_lambda(&contacts, &origin);
    if !(lambda > 0.0) {
        return GraspQuality::NONE;
    }
    match wrench_set(&contacts, cfg.cone_edges, lambda, &origin) {
        Ok(ws) => grasp_quality(&ws, &cfg.quality),
        Err(_) => GraspQuality::NONE,
    }
}
